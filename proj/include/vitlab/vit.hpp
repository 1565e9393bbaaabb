#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vitlab/autodiff.hpp"
#include "vitlab/dataset.hpp"
#include "vitlab/tensor.hpp"

namespace vitlab {

struct ViTConfig {
    int64_t image_size = 32;
    int64_t patch_size = 4;
    int64_t embed_dim = 64;
    int64_t layers = 4;
    int64_t heads = 4;
    int64_t mlp_dim = 256;
    int64_t num_classes = 10;
    double dropout = 0.0;

    void validate() const;
    int64_t grid() const { return image_size / patch_size; }
    int64_t tokens() const { return grid() * grid(); }          // N
    int64_t seq_len() const { return tokens() + 1; }            // N + 1 (class token)
    int64_t head_dim() const { return embed_dim / heads; }
    int64_t patch_dim() const { return 3 * patch_size * patch_size; }

    // Compact id like "p4e64l4h4"; mlp_dim defaults to 4*embed_dim when
    // parsing and is appended as "m<dim>" only when it differs.
    std::string id() const;
    static ViTConfig from_id(const std::string& id, int64_t image_size = 32, int64_t num_classes = 10);
};

template <class T>
struct ViTModelT {
    ViTConfig config;

    VarT<T> patch_w, patch_b;   // [3P^2,E], [E]
    VarT<T> cls_token;          // [1,E]
    VarT<T> pos_embed;          // [N+1,E]
    struct Block {
        VarT<T> ln1_g, ln1_b;
        VarT<T> wq, bq, wk, bk, wv, bv;  // [E,E],[E] each
        VarT<T> wo, bo;
        VarT<T> ln2_g, ln2_b;
        VarT<T> w1, b1;  // [E,mlp],[mlp]
        VarT<T> w2, b2;  // [mlp,E],[E]
    };
    std::vector<Block> blocks;
    VarT<T> lnf_g, lnf_b;
    VarT<T> head_w, head_b;  // [E,C],[C]

    static ViTModelT init(const ViTConfig& cfg, uint64_t seed);

    // Parameters in declaration order; this order defines the checkpoint
    // byte layout.
    std::vector<std::pair<std::string, VarT<T>*>> named_params();
    std::vector<std::pair<std::string, const VarT<T>*>> named_params() const;

    int64_t param_count() const;
    int64_t block_param_count() const;
    void zero_grads();
    ViTModelT clone() const;
    void copy_values_from(const ViTModelT& other);
};

using ViTModel = ViTModelT<float>;

// Patch tokens + class token + positional embeddings for one image
// ([3,S,S], already normalized). Returns the [N+1, E] token sequence.
template <class T>
VarT<T> patchify_embed(TapeT<T>* tape, const TensorT<T>& image, const ViTModelT<T>& model);

// One attention sub-layer applied to a token sequence [T,E] with a given
// block's projection weights: per-head scaled dot-product attention, heads
// concatenated and projected. Returns the output and the [H,T,T] weights.
template <class T>
std::pair<VarT<T>, TensorT<T>> multi_head_attention(TapeT<T>* tape, const VarT<T>& x,
                                                    const typename ViTModelT<T>::Block& block, int64_t heads);

// Full forward over a normalized batch [B,3,S,S]. Records on the tape when
// given one; train_mode enables dropout (rng required when dropout > 0).
template <class T>
struct ForwardVars {
    VarT<T> logits;                          // [B,C]
    std::shared_ptr<TensorT<T>> attention;   // last layer, [B,H,T,T]
};

template <class T>
ForwardVars<T> forward_batch(TapeT<T>* tape, const ViTModelT<T>& model, const TensorT<T>& images,
                             bool train_mode = false, SplitMix64* dropout_rng = nullptr);

// Eval-mode forward: probabilities plus per-sample last-layer attention.
struct ForwardResult {
    Tensor logits;     // [B,C]
    Tensor probs;      // [B,C]
    Tensor attention;  // [B,H,T,T]
};

ForwardResult forward(const ViTModel& model, const Tensor& images);

// Streams eval-mode predictions over dataset samples (normalize only, no
// augmentation) in batches; consume receives the batch offset into
// `indices`, the batch probabilities and the batch attention tensor.
void predict_batches(const ViTModel& model, const ImageDataset& data, std::span<const int64_t> indices,
                     int64_t batch_size,
                     const std::function<void(int64_t, const Tensor&, const Tensor&)>& consume);

// Probabilities [n,C] for the given samples.
Tensor predict_probs(const ViTModel& model, const ImageDataset& data, std::span<const int64_t> indices,
                     int64_t batch_size);

// ---------------------------------------------------------------------------
// Fine-tuning
// ---------------------------------------------------------------------------

struct TrainExample {
    int64_t index = 0;     // sample index into the dataset
    int label = 0;         // possibly noisy
    float smoothing = 0;   // label-smoothing eps used for this sample
};

struct TrainConfig {
    int max_epochs = 20;
    int patience = 10;          // epochs without val improvement before stopping
    int batch_size = 256;       // scaled down when the split is smaller
    double lr = 3e-4;
    double val_fraction = 0.1;  // held out per round for early stopping
    bool augment = true;
    bool cosine_schedule = true;
};

struct TrainStats {
    int epochs_run = 0;
    double best_val_loss = 0.0;
    double seconds = 0.0;
    std::vector<double> epoch_train_loss;
};

// One DAL round of fine-tuning: Adam with a per-round cosine schedule,
// early stopping on a held-out validation split, best-validation weights
// restored on return.
TrainStats fit_round(ViTModel& model, const ImageDataset& data, const std::vector<TrainExample>& examples,
                     const TrainConfig& cfg, uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoints: text header (config as key=value lines, then "tensors"),
// followed by raw little-endian float32 for each named tensor in
// declaration order. See README for the exact layout.
// ---------------------------------------------------------------------------
void save_checkpoint(const ViTModel& model, const std::string& path);
ViTModel load_checkpoint(const std::string& path);

}  // namespace vitlab
