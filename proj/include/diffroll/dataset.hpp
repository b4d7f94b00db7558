#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffroll/features.hpp"
#include "diffroll/trainer.hpp"

namespace diffroll {

enum class Split { Train, Validation, Test };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
    std::string audio_path;  // empty for rolls-only entries
    std::string midi_path;
    Split split = Split::Train;
    bool paired() const { return !audio_path.empty(); }
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    bool rolls_only = false;
    std::vector<std::string> excluded;  // dangling or filtered paths, for the report
    int overlap_removed = 0;            // train entries dropped by the overlap filter

    std::vector<ManifestEntry> split_entries(Split s) const;
};

enum class DatasetLayout { Flat, Maestro, Maps };

DatasetLayout layout_from_string(const std::string& s);

// Scans a dataset tree:
//  - flat: *.wav paired with *.mid/*.midi by stem, everything in train
//  - maestro: maestro-v*.json / *.csv metadata with explicit splits
//  - maps: MAPS folder convention, Disklavier subsets (ENSTDkCl/ENSTDkAm) as
//    test; remove_train_test_overlap drops train entries whose piece id also
//    appears in the test split
DatasetManifest ingest(const std::string& root, DatasetLayout layout,
                       bool remove_train_test_overlap = false);

// MIDI-only tree for unsupervised pretraining.
DatasetManifest ingest_rolls_only(const std::string& root);

void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);

// Deterministic synthetic pairs: sparse random note sequences rendered with
// additive sine synthesis at each note's fundamental, written as wav + midi.
// Segments are 327,680 samples (20.48 s) at 16 kHz.
DatasetManifest make_toy_dataset(int num_items, uint64_t seed, const std::string& out_dir);

// Loads entries into memory as aligned (mel, roll) pairs. Conditioners are
// cached under cache_dir keyed by (audio bytes, feature config) when given.
std::vector<TrainSample> load_samples(const std::vector<ManifestEntry>& entries,
                                      const MelExtractor& extractor,
                                      const std::string& cache_dir = "");

}  // namespace diffroll
