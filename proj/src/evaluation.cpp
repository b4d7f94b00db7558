#include "diffroll/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "diffroll/midi.hpp"

namespace fs = std::filesystem;

namespace diffroll {

namespace {

// Kuhn's augmenting-path maximum bipartite matching. Instances are small
// (notes in one file), so O(V*E) is plenty.
bool try_augment(int p, const std::vector<std::vector<int>>& adj,
                 std::vector<int>& ref_match, std::vector<char>& visited) {
    for (const int r : adj[static_cast<size_t>(p)]) {
        if (visited[static_cast<size_t>(r)]) continue;
        visited[static_cast<size_t>(r)] = 1;
        if (ref_match[static_cast<size_t>(r)] < 0 ||
            try_augment(ref_match[static_cast<size_t>(r)], adj, ref_match, visited)) {
            ref_match[static_cast<size_t>(r)] = p;
            return true;
        }
    }
    return false;
}

}  // namespace

MatchResult match_notes(const std::vector<NoteEvent>& pred,
                        const std::vector<NoteEvent>& ref, double tol) {
    check_arg(tol >= 0.0, "match_notes: tolerance must be non-negative");

    std::vector<std::vector<int>> adj(pred.size());
    for (size_t p = 0; p < pred.size(); ++p)
        for (size_t r = 0; r < ref.size(); ++r)
            if (pred[p].pitch == ref[r].pitch &&
                std::fabs(pred[p].onset - ref[r].onset) <= tol)
                adj[p].push_back(static_cast<int>(r));

    std::vector<int> ref_match(ref.size(), -1);
    for (size_t p = 0; p < pred.size(); ++p) {
        std::vector<char> visited(ref.size(), 0);
        try_augment(static_cast<int>(p), adj, ref_match, visited);
    }

    MatchResult res;
    res.tolerance = tol;
    for (size_t r = 0; r < ref.size(); ++r)
        if (ref_match[r] >= 0) res.pairs.emplace_back(ref_match[r], static_cast<int>(r));
    std::sort(res.pairs.begin(), res.pairs.end());

    const auto matches = static_cast<double>(res.pairs.size());
    res.precision = pred.empty() ? 0.0 : matches / static_cast<double>(pred.size());
    res.recall = ref.empty() ? 0.0 : matches / static_cast<double>(ref.size());
    res.f1 = (res.precision + res.recall) > 0.0
                 ? 2.0 * res.precision * res.recall / (res.precision + res.recall)
                 : 0.0;
    return res;
}

namespace {

std::map<std::string, fs::path> midi_files_by_stem(const std::string& dir) {
    std::map<std::string, fs::path> out;
    if (!fs::is_directory(dir)) throw io_error("not a directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".mid" || ext == ".midi") out[entry.path().stem().string()] = entry.path();
    }
    return out;
}

std::vector<NoteEvent> load_notes(const fs::path& p) {
    const MidiContent midi = read_midi(p.string());
    std::vector<NoteEvent> notes;
    notes.reserve(midi.notes.size());
    for (const MidiNote& n : midi.notes) notes.push_back({n.pitch, n.onset, n.offset});
    return notes;
}

}  // namespace

CorpusEval evaluate_corpus(const std::string& pred_dir, const std::string& ref_dir,
                           double tol) {
    const auto preds = midi_files_by_stem(pred_dir);
    const auto refs = midi_files_by_stem(ref_dir);

    CorpusEval out;
    for (const auto& [stem, path] : refs)
        if (!preds.count(stem)) out.missing_pred.push_back(stem);
    for (const auto& [stem, path] : preds)
        if (!refs.count(stem)) out.missing_ref.push_back(stem);

    double f1_sum = 0.0, p_sum = 0.0, r_sum = 0.0;
    for (const auto& [stem, pred_path] : preds) {
        const auto it = refs.find(stem);
        if (it == refs.end()) continue;
        FileEval fe;
        fe.name = stem;
        const auto pred_notes = load_notes(pred_path);
        const auto ref_notes = load_notes(it->second);
        fe.pred_notes = static_cast<int>(pred_notes.size());
        fe.ref_notes = static_cast<int>(ref_notes.size());
        fe.result = match_notes(pred_notes, ref_notes, tol);
        f1_sum += fe.result.f1;
        p_sum += fe.result.precision;
        r_sum += fe.result.recall;
        out.files.push_back(std::move(fe));
    }

    if (out.files.empty()) {
        out.no_files = true;
    } else {
        const auto n = static_cast<double>(out.files.size());
        out.macro_f1 = f1_sum / n;
        out.macro_precision = p_sum / n;
        out.macro_recall = r_sum / n;
    }
    return out;
}

}  // namespace diffroll
