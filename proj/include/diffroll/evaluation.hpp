#pragma once

#include <string>
#include <vector>

#include "diffroll/pianoroll.hpp"

namespace diffroll {

struct MatchResult {
    std::vector<std::pair<int, int>> pairs;  // (pred index, ref index)
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double tolerance = 0.05;
};

// Maximum one-to-one matching where a (pred, ref) pair is admissible iff the
// pitches are equal and |onset difference| <= tol (inclusive boundary,
// following the usual transcription-evaluation convention). Offsets are
// ignored. P = matches/|pred|, R = matches/|ref|, F1 = 2PR/(P+R) with 0 when
// P + R = 0.
MatchResult match_notes(const std::vector<NoteEvent>& pred,
                        const std::vector<NoteEvent>& ref, double tol = 0.05);

struct FileEval {
    std::string name;
    MatchResult result;
    int pred_notes = 0;
    int ref_notes = 0;
};

struct CorpusEval {
    std::vector<FileEval> files;
    std::vector<std::string> missing_pred;  // ref files with no counterpart
    std::vector<std::string> missing_ref;   // pred files with no counterpart
    double macro_f1 = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    bool no_files = false;
    bool complete() const { return missing_pred.empty() && missing_ref.empty(); }
};

// Matches *.mid / *.midi files by stem across the two directories and reports
// per-file plus macro-averaged scores. Files without a counterpart are listed
// and excluded from the aggregate.
CorpusEval evaluate_corpus(const std::string& pred_dir, const std::string& ref_dir,
                           double tol = 0.05);

}  // namespace diffroll
