#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cctl/features.hpp"
#include "cctl/rng.hpp"

namespace cctl {

// Two-domain synthetic CTR world. Ground truth is logistic in per-entity
// latent vectors; the target concept matrix is blended toward an independent
// one by domain_shift, and a fraction of source labels can be flipped.
struct SynthConfig {
    size_t n_users_source = 1000;
    size_t n_items_source = 1000;
    size_t n_users_target = 300;
    size_t n_items_target = 300;
    double user_overlap = 0.5;  // fraction of the smaller user population shared
    double item_overlap = 0.5;
    size_t latent_dim = 8;
    double domain_shift = 0.0;        // 0 = identical click concepts, 1 = independent
    double source_label_noise = 0.0;  // fraction of source labels flipped
    size_t n_samples_source = 100000;
    size_t n_samples_target = 20000;
    size_t max_seq_len = 10;
    double logit_scale = 2.0;
    size_t context_vocab = 24;
    size_t embed_dim = 8;
    uint64_t seed = 1;

    void validate() const;
};

struct OverlapMaps {
    std::map<int64_t, int64_t> users_src2tgt;
    std::map<int64_t, int64_t> items_src2tgt;
};

struct Dataset {
    FeatureSchema source_schema;
    FeatureSchema target_schema;
    std::vector<Sample> source_samples;
    std::vector<Sample> target_samples;
    OverlapMaps overlap;
    // recorded 90/10 split, index lists into the sample vectors
    std::vector<size_t> source_train, source_test;
    std::vector<size_t> target_train, target_test;
    uint64_t seed = 0;

    const std::vector<Sample>& samples(Domain d) const {
        return d == Domain::source ? source_samples : target_samples;
    }
    const FeatureSchema& schema(Domain d) const {
        return d == Domain::source ? source_schema : target_schema;
    }
};

// ground truth behind a generated dataset; deterministic given the config
struct SynthGroundTruth {
    DenseMatrix w_source, w_target;                 // latent_dim x latent_dim, unit rows
    std::vector<std::vector<double>> user_latents_source, user_latents_target; // [id]
    std::vector<std::vector<double>> item_latents_source, item_latents_target;
    std::vector<double> ctx_bias_source, ctx_bias_target;

    double click_prob(Domain d, int64_t user_id, int64_t item_id, int64_t ctx_id,
                      double logit_scale) const;
};

SynthGroundTruth synth_ground_truth(const SynthConfig& cfg);
Dataset generate_synthetic(const SynthConfig& cfg);

// ---------------- CSV ----------------
// Column format: one column per schema field (bare integer ids), then the
// behavior sequence as "|"-separated item ids (may be empty), then the 0/1
// label. First line is a header. Unknown values map to the reserved OOV id 0.

std::vector<Sample> load_csv(const std::string& path, const FeatureSchema& schema);
void write_csv(const std::string& path, const FeatureSchema& schema,
               const std::vector<Sample>& samples);

// dataset directory: source.csv + target.csv + meta.json (schemas, overlap, split)
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// ---------------- batching ----------------

enum class Split { train, test };

// Deterministic epoch stream: seeded reshuffle per epoch, short final batch
// emitted. An empty index list yields empty batches.
class BatchStream {
public:
    BatchStream() : rng_(0) {}
    BatchStream(const std::vector<Sample>* samples, std::vector<size_t> indices,
                size_t batch_size, Rng rng);

    Batch next();
    size_t batches_per_epoch() const;
    size_t size() const { return indices_.size(); }

private:
    void reshuffle();

    const std::vector<Sample>* samples_ = nullptr;
    std::vector<size_t> indices_;
    size_t batch_size_ = 1;
    size_t pos_ = 0;
    Rng rng_;
};

BatchStream make_batches(const Dataset& ds, Domain domain, Split split, size_t batch_size,
                         Rng rng);

// linkage for the contrastive term, built from the overlap maps
EntityLinkage make_linkage(const Dataset& ds);

} // namespace cctl
