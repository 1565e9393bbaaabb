#include "vitlab/vit.hpp"

#include <bit>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "vitlab/errors.hpp"

namespace vitlab {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void ViTConfig::validate() const {
    if (image_size < 1 || patch_size < 1 || embed_dim < 1 || layers < 1 || heads < 1 || mlp_dim < 1 ||
        num_classes < 1)
        throw InputError("all model extents must be >= 1");
    if (image_size % patch_size != 0)
        throw ShapeError("image size " + std::to_string(image_size) + " not divisible by patch size " +
                         std::to_string(patch_size));
    if (embed_dim % heads != 0)
        throw ShapeError("embed dim " + std::to_string(embed_dim) + " not divisible by heads " +
                         std::to_string(heads));
    if (dropout < 0.0 || dropout >= 1.0) throw InputError("dropout must lie in [0,1)");
}

std::string ViTConfig::id() const {
    std::string s = "p" + std::to_string(patch_size) + "e" + std::to_string(embed_dim) + "l" +
                    std::to_string(layers) + "h" + std::to_string(heads);
    if (mlp_dim != 4 * embed_dim) s += "m" + std::to_string(mlp_dim);
    return s;
}

ViTConfig ViTConfig::from_id(const std::string& id, int64_t image_size, int64_t num_classes) {
    ViTConfig cfg;
    cfg.image_size = image_size;
    cfg.num_classes = num_classes;
    size_t pos = 0;
    auto read_field = [&](char tag) -> int64_t {
        if (pos >= id.size() || id[pos] != tag)
            throw FormatError("bad model id '" + id + "': expected '" + std::string(1, tag) + "' at position " +
                              std::to_string(pos));
        ++pos;
        size_t start = pos;
        while (pos < id.size() && std::isdigit(static_cast<unsigned char>(id[pos]))) ++pos;
        if (pos == start) throw FormatError("bad model id '" + id + "': missing number after '" + tag + "'");
        return std::stoll(id.substr(start, pos - start));
    };
    cfg.patch_size = read_field('p');
    cfg.embed_dim = read_field('e');
    cfg.layers = read_field('l');
    cfg.heads = read_field('h');
    cfg.mlp_dim = (pos < id.size() && id[pos] == 'm') ? read_field('m') : 4 * cfg.embed_dim;
    if (pos != id.size()) throw FormatError("bad model id '" + id + "': trailing characters");
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

namespace {

template <class T>
VarT<T> init_weight(std::vector<int64_t> shape, SplitMix64& rng, double sigma = 0.02) {
    TensorT<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(rng.truncated_normal(sigma));
    return make_param(std::move(t));
}

template <class T>
VarT<T> init_const(std::vector<int64_t> shape, T value) {
    return make_param(TensorT<T>::full(std::move(shape), value));
}

}  // namespace

template <class T>
ViTModelT<T> ViTModelT<T>::init(const ViTConfig& cfg, uint64_t seed) {
    cfg.validate();
    SplitMix64 rng(mix_seed(seed, 0x11a0));
    ViTModelT<T> m;
    m.config = cfg;
    const int64_t E = cfg.embed_dim, M = cfg.mlp_dim, C = cfg.num_classes;
    m.patch_w = init_weight<T>({cfg.patch_dim(), E}, rng);
    m.patch_b = init_const<T>({E}, T(0));
    m.cls_token = init_weight<T>({1, E}, rng);
    m.pos_embed = init_weight<T>({cfg.seq_len(), E}, rng);
    m.blocks.resize(static_cast<size_t>(cfg.layers));
    for (auto& blk : m.blocks) {
        blk.ln1_g = init_const<T>({E}, T(1));
        blk.ln1_b = init_const<T>({E}, T(0));
        blk.wq = init_weight<T>({E, E}, rng);
        blk.bq = init_const<T>({E}, T(0));
        blk.wk = init_weight<T>({E, E}, rng);
        blk.bk = init_const<T>({E}, T(0));
        blk.wv = init_weight<T>({E, E}, rng);
        blk.bv = init_const<T>({E}, T(0));
        blk.wo = init_weight<T>({E, E}, rng);
        blk.bo = init_const<T>({E}, T(0));
        blk.ln2_g = init_const<T>({E}, T(1));
        blk.ln2_b = init_const<T>({E}, T(0));
        blk.w1 = init_weight<T>({E, M}, rng);
        blk.b1 = init_const<T>({M}, T(0));
        blk.w2 = init_weight<T>({M, E}, rng);
        blk.b2 = init_const<T>({E}, T(0));
    }
    m.lnf_g = init_const<T>({E}, T(1));
    m.lnf_b = init_const<T>({E}, T(0));
    m.head_w = init_weight<T>({E, C}, rng);
    m.head_b = init_const<T>({C}, T(0));
    return m;
}

template <class T>
std::vector<std::pair<std::string, VarT<T>*>> ViTModelT<T>::named_params() {
    std::vector<std::pair<std::string, VarT<T>*>> out;
    out.emplace_back("patch_w", &patch_w);
    out.emplace_back("patch_b", &patch_b);
    out.emplace_back("cls_token", &cls_token);
    out.emplace_back("pos_embed", &pos_embed);
    for (size_t l = 0; l < blocks.size(); ++l) {
        const std::string p = "block" + std::to_string(l) + ".";
        auto& b = blocks[l];
        out.emplace_back(p + "ln1_g", &b.ln1_g);
        out.emplace_back(p + "ln1_b", &b.ln1_b);
        out.emplace_back(p + "wq", &b.wq);
        out.emplace_back(p + "bq", &b.bq);
        out.emplace_back(p + "wk", &b.wk);
        out.emplace_back(p + "bk", &b.bk);
        out.emplace_back(p + "wv", &b.wv);
        out.emplace_back(p + "bv", &b.bv);
        out.emplace_back(p + "wo", &b.wo);
        out.emplace_back(p + "bo", &b.bo);
        out.emplace_back(p + "ln2_g", &b.ln2_g);
        out.emplace_back(p + "ln2_b", &b.ln2_b);
        out.emplace_back(p + "w1", &b.w1);
        out.emplace_back(p + "b1", &b.b1);
        out.emplace_back(p + "w2", &b.w2);
        out.emplace_back(p + "b2", &b.b2);
    }
    out.emplace_back("lnf_g", &lnf_g);
    out.emplace_back("lnf_b", &lnf_b);
    out.emplace_back("head_w", &head_w);
    out.emplace_back("head_b", &head_b);
    return out;
}

template <class T>
std::vector<std::pair<std::string, const VarT<T>*>> ViTModelT<T>::named_params() const {
    auto mut = const_cast<ViTModelT<T>*>(this)->named_params();
    std::vector<std::pair<std::string, const VarT<T>*>> out;
    out.reserve(mut.size());
    for (auto& [n, p] : mut) out.emplace_back(n, p);
    return out;
}

template <class T>
int64_t ViTModelT<T>::param_count() const {
    int64_t n = 0;
    for (const auto& [name, p] : named_params()) n += p->numel();
    return n;
}

template <class T>
int64_t ViTModelT<T>::block_param_count() const {
    const int64_t E = config.embed_dim, M = config.mlp_dim;
    return 2 * E + 4 * (E * E + E) + 2 * E + (E * M + M) + (M * E + E);
}

template <class T>
void ViTModelT<T>::zero_grads() {
    for (auto& [name, p] : named_params())
        std::fill(p->grad->data.begin(), p->grad->data.end(), T(0));
}

template <class T>
ViTModelT<T> ViTModelT<T>::clone() const {
    ViTModelT<T> copy = init(config, 0);
    copy.copy_values_from(*this);
    return copy;
}

template <class T>
void ViTModelT<T>::copy_values_from(const ViTModelT<T>& other) {
    auto dst = named_params();
    auto src = other.named_params();
    if (dst.size() != src.size()) throw ShapeError("model architectures differ");
    for (size_t i = 0; i < dst.size(); ++i) {
        if (!dst[i].second->val->same_shape(*src[i].second->val))
            throw ShapeError("parameter " + dst[i].first + " shape mismatch");
        dst[i].second->val = std::make_shared<TensorT<T>>(*src[i].second->val);
    }
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

namespace {

// [B,3,S,S] -> [B*N, 3P^2]; patch vectors are laid out (channel, y, x).
template <class T>
TensorT<T> patches_matrix(const TensorT<T>& images, int64_t patch) {
    const int64_t B = images.dim(0), S = images.dim(2);
    const int64_t G = S / patch, N = G * G, D = 3 * patch * patch;
    TensorT<T> out({B * N, D});
    const int64_t plane = S * S;
    for (int64_t b = 0; b < B; ++b) {
        const T* img = images.data.data() + b * 3 * plane;
        for (int64_t gy = 0; gy < G; ++gy)
            for (int64_t gx = 0; gx < G; ++gx) {
                T* dst = out.data.data() + (b * N + gy * G + gx) * D;
                for (int64_t c = 0; c < 3; ++c)
                    for (int64_t py = 0; py < patch; ++py)
                        for (int64_t px = 0; px < patch; ++px)
                            *dst++ = img[c * plane + (gy * patch + py) * S + (gx * patch + px)];
            }
    }
    return out;
}

}  // namespace

template <class T>
VarT<T> patchify_embed(TapeT<T>* tape, const TensorT<T>& image, const ViTModelT<T>& model) {
    const ViTConfig& cfg = model.config;
    if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != cfg.image_size || image.dim(2) != cfg.image_size)
        throw ShapeError("expected image [3," + std::to_string(cfg.image_size) + "," +
                         std::to_string(cfg.image_size) + "], got " + image.shape_str());
    TensorT<T> batch({1, 3, cfg.image_size, cfg.image_size}, image.data);
    auto patches = make_const(patches_matrix(batch, cfg.patch_size));
    auto tok = add_bias(tape, matmul(tape, patches, model.patch_w), model.patch_b);
    auto seq = prepend_row_per_block(tape, tok, model.cls_token, 1);
    return add_per_block(tape, seq, model.pos_embed, 1);
}

template <class T>
std::pair<VarT<T>, TensorT<T>> multi_head_attention(TapeT<T>* tape, const VarT<T>& x,
                                                    const typename ViTModelT<T>::Block& block, int64_t heads) {
    if (x.val->rank() != 2) throw ShapeError("attention input must be [tokens, embed], got " + x.val->shape_str());
    const int64_t seq = x.dim(0), E = x.dim(1);
    if (E != block.wq.dim(0)) throw ShapeError("attention input embed " + x.val->shape_str() + " vs weights " + block.wq.val->shape_str());
    if (E % heads != 0) throw ShapeError("embed dim " + std::to_string(E) + " not divisible by " + std::to_string(heads) + " heads");
    auto q = add_bias(tape, matmul(tape, x, block.wq), block.bq);
    auto k = add_bias(tape, matmul(tape, x, block.wk), block.bk);
    auto v = add_bias(tape, matmul(tape, x, block.wv), block.bv);
    auto core = mha_core(tape, q, k, v, 1, seq, heads);
    auto y = add_bias(tape, matmul(tape, core.out, block.wo), block.bo);
    TensorT<T> attn({heads, seq, seq}, core.attention->data);
    return {y, std::move(attn)};
}

template <class T>
ForwardVars<T> forward_batch(TapeT<T>* tape, const ViTModelT<T>& model, const TensorT<T>& images,
                             bool train_mode, SplitMix64* dropout_rng) {
    const ViTConfig& cfg = model.config;
    if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != cfg.image_size ||
        images.dim(3) != cfg.image_size)
        throw ShapeError("expected batch [B,3," + std::to_string(cfg.image_size) + "," +
                         std::to_string(cfg.image_size) + "], got " + images.shape_str());
    const int64_t B = images.dim(0);
    const int64_t seq = cfg.seq_len();
    const bool drop = train_mode && cfg.dropout > 0.0;
    if (drop && !dropout_rng) throw InputError("dropout requires an rng in train mode");

    auto patches = make_const(patches_matrix(images, cfg.patch_size));
    auto tok = add_bias(tape, matmul(tape, patches, model.patch_w), model.patch_b);
    auto x = add_per_block(tape, prepend_row_per_block(tape, tok, model.cls_token, B), model.pos_embed, B);
    if (drop) x = dropout(tape, x, cfg.dropout, *dropout_rng);

    std::shared_ptr<TensorT<T>> last_attention;
    for (const auto& blk : model.blocks) {
        auto h = layer_norm(tape, x, blk.ln1_g, blk.ln1_b);
        auto q = add_bias(tape, matmul(tape, h, blk.wq), blk.bq);
        auto k = add_bias(tape, matmul(tape, h, blk.wk), blk.bk);
        auto v = add_bias(tape, matmul(tape, h, blk.wv), blk.bv);
        auto core = mha_core(tape, q, k, v, B, seq, cfg.heads);
        last_attention = core.attention;
        auto o = add_bias(tape, matmul(tape, core.out, blk.wo), blk.bo);
        if (drop) o = dropout(tape, o, cfg.dropout, *dropout_rng);
        x = add(tape, x, o);
        auto h2 = layer_norm(tape, x, blk.ln2_g, blk.ln2_b);
        auto m = gelu(tape, add_bias(tape, matmul(tape, h2, blk.w1), blk.b1));
        auto m2 = add_bias(tape, matmul(tape, m, blk.w2), blk.b2);
        if (drop) m2 = dropout(tape, m2, cfg.dropout, *dropout_rng);
        x = add(tape, x, m2);
    }
    auto xf = layer_norm(tape, x, model.lnf_g, model.lnf_b);
    auto cls = take_rows_strided(tape, xf, 0, seq, B);
    auto logits = add_bias(tape, matmul(tape, cls, model.head_w), model.head_b);
    return {logits, last_attention};
}

ForwardResult forward(const ViTModel& model, const Tensor& images) {
    auto fv = forward_batch<float>(nullptr, model, images, false, nullptr);
    ForwardResult out;
    out.logits = *fv.logits.val;
    out.probs = softmax(out.logits, 1);
    out.attention = *fv.attention;
    return out;
}

void predict_batches(const ViTModel& model, const ImageDataset& data, std::span<const int64_t> indices,
                     int64_t batch_size,
                     const std::function<void(int64_t, const Tensor&, const Tensor&)>& consume) {
    if (batch_size < 1) throw InputError("batch size must be >= 1");
    const int64_t n = static_cast<int64_t>(indices.size());
    Tensor batch;
    for (int64_t off = 0; off < n; off += batch_size) {
        const int64_t b = std::min(batch_size, n - off);
        normalize_batch(data, indices.subspan(static_cast<size_t>(off), static_cast<size_t>(b)), batch);
        const ForwardResult r = forward(model, batch);
        consume(off, r.probs, r.attention);
    }
}

Tensor predict_probs(const ViTModel& model, const ImageDataset& data, std::span<const int64_t> indices,
                     int64_t batch_size) {
    if (indices.empty()) throw InputError("no samples to predict");
    Tensor out({static_cast<int64_t>(indices.size()), model.config.num_classes});
    const int64_t C = model.config.num_classes;
    predict_batches(model, data, indices, batch_size, [&](int64_t off, const Tensor& probs, const Tensor&) {
        std::copy(probs.data.begin(), probs.data.end(), out.data.begin() + off * C);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

struct AdamState {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int64_t t = 0;
    std::vector<std::vector<float>> m, v;

    void init(ViTModel& model) {
        for (auto& [name, p] : model.named_params()) {
            m.emplace_back(p->numel(), 0.0f);
            v.emplace_back(p->numel(), 0.0f);
        }
    }

    void step(ViTModel& model, double lr) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        auto params = model.named_params();
        for (size_t i = 0; i < params.size(); ++i) {
            auto& p = *params[i].second;
            float* w = p.val->data.data();
            const float* g = p.grad->data.data();
            float* mi = m[i].data();
            float* vi = v[i].data();
            const int64_t n = p.numel();
            for (int64_t j = 0; j < n; ++j) {
                const double gj = static_cast<double>(g[j]);
                const double mj = beta1 * mi[j] + (1.0 - beta1) * gj;
                const double vj = beta2 * vi[j] + (1.0 - beta2) * gj * gj;
                mi[j] = static_cast<float>(mj);
                vi[j] = static_cast<float>(vj);
                w[j] -= static_cast<float>(lr * (mj / bc1) / (std::sqrt(vj / bc2) + eps));
            }
        }
    }
};

std::vector<std::vector<float>> snapshot_values(const ViTModel& model) {
    std::vector<std::vector<float>> out;
    for (const auto& [name, p] : model.named_params()) out.push_back(p->val->data);
    return out;
}

void restore_values(ViTModel& model, const std::vector<std::vector<float>>& snap) {
    auto params = model.named_params();
    for (size_t i = 0; i < params.size(); ++i) {
        auto fresh = std::make_shared<Tensor>(params[i].second->val->shape);
        fresh->data = snap[i];
        params[i].second->val = std::move(fresh);
    }
}

double eval_loss(const ViTModel& model, const ImageDataset& data, const std::vector<TrainExample>& examples,
                 int64_t batch_size) {
    double total = 0.0;
    Tensor batch;
    std::vector<int64_t> idx;
    std::vector<int> labels;
    std::vector<double> eps;
    for (size_t off = 0; off < examples.size(); off += static_cast<size_t>(batch_size)) {
        const size_t b = std::min(static_cast<size_t>(batch_size), examples.size() - off);
        idx.clear();
        labels.clear();
        eps.clear();
        for (size_t i = off; i < off + b; ++i) {
            idx.push_back(examples[i].index);
            labels.push_back(examples[i].label);
            eps.push_back(examples[i].smoothing);
        }
        normalize_batch(data, idx, batch);
        auto fv = forward_batch<float>(nullptr, model, batch, false, nullptr);
        auto loss = cross_entropy_smoothed<float>(nullptr, fv.logits, labels, eps);
        total += static_cast<double>(loss.val->data[0]) * static_cast<double>(b);
    }
    return total / static_cast<double>(examples.size());
}

}  // namespace

TrainStats fit_round(ViTModel& model, const ImageDataset& data, const std::vector<TrainExample>& examples,
                     const TrainConfig& cfg, uint64_t seed) {
    if (examples.empty()) throw InputError("empty labeled set");
    if (cfg.max_epochs < 1 || cfg.patience < 1 || cfg.batch_size < 1)
        throw InputError("train config extents must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();

    SplitMix64 rng(mix_seed(seed, 0xf17));
    auto shuffled = examples;
    rng.shuffle(shuffled);
    const size_t n_val = static_cast<size_t>(static_cast<double>(shuffled.size()) * cfg.val_fraction);
    std::vector<TrainExample> val(shuffled.end() - static_cast<ptrdiff_t>(n_val), shuffled.end());
    std::vector<TrainExample> train(shuffled.begin(), shuffled.end() - static_cast<ptrdiff_t>(n_val));
    if (train.empty()) std::swap(train, val);
    const int64_t batch_size = std::min<int64_t>(cfg.batch_size, static_cast<int64_t>(train.size()));

    AdamState opt;
    opt.init(model);

    TrainStats stats;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    auto best_weights = snapshot_values(model);

    Tensor batch;
    std::vector<int64_t> idx;
    std::vector<int> labels;
    std::vector<double> eps;
    std::vector<uint8_t> img_buf;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double lr = cfg.cosine_schedule
                              ? cfg.lr * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(epoch - 1) /
                                                               static_cast<double>(cfg.max_epochs)))
                              : cfg.lr;
        rng.shuffle(train);
        double epoch_loss = 0.0;
        for (size_t off = 0; off < train.size(); off += static_cast<size_t>(batch_size)) {
            const size_t b = std::min(static_cast<size_t>(batch_size), train.size() - off);
            const int64_t S = data.side;
            batch = Tensor({static_cast<int64_t>(b), 3, S, S});
            labels.clear();
            eps.clear();
            for (size_t i = 0; i < b; ++i) {
                const auto& ex = train[off + i];
                labels.push_back(ex.label);
                eps.push_back(ex.smoothing);
                Tensor one;
                if (cfg.augment) {
                    img_buf = augment(data.image(ex.index), S, rng);
                    one = normalize_image(img_buf, S);
                } else {
                    one = normalize_image(data.image(ex.index), S);
                }
                std::copy_n(one.data.begin(), one.numel(), batch.data.begin() + static_cast<int64_t>(i) * one.numel());
            }
            Tape tape;
            auto fv = forward_batch<float>(&tape, model, batch, true, &rng);
            auto loss = cross_entropy_smoothed<float>(&tape, fv.logits, labels, eps);
            model.zero_grads();
            tape.backward(loss);
            opt.step(model, lr);
            epoch_loss += static_cast<double>(loss.val->data[0]) * static_cast<double>(b);
        }
        epoch_loss /= static_cast<double>(train.size());
        stats.epoch_train_loss.push_back(epoch_loss);
        stats.epochs_run = epoch;

        const double val_loss = val.empty() ? epoch_loss : eval_loss(model, data, val, batch_size);
        if (val_loss < best_val) {
            best_val = val_loss;
            best_epoch = epoch;
            best_weights = snapshot_values(model);
        }
        if (epoch - best_epoch >= cfg.patience) break;
    }

    restore_values(model, best_weights);
    stats.best_val_loss = best_val;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stats;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

void save_checkpoint(const ViTModel& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw PathError("cannot write checkpoint: " + path);
    const ViTConfig& c = model.config;
    char buf[64];
    f << "vitlab-checkpoint-v1\n";
    f << "image_size=" << c.image_size << "\n";
    f << "patch_size=" << c.patch_size << "\n";
    f << "embed_dim=" << c.embed_dim << "\n";
    f << "layers=" << c.layers << "\n";
    f << "heads=" << c.heads << "\n";
    f << "mlp_dim=" << c.mlp_dim << "\n";
    f << "num_classes=" << c.num_classes << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", c.dropout);
    f << "dropout=" << buf << "\n";
    f << "tensors\n";
    for (const auto& [name, p] : model.named_params())
        f.write(reinterpret_cast<const char*>(p->val->data.data()),
                static_cast<std::streamsize>(p->val->data.size() * sizeof(float)));
    if (!f) throw PathError("write failed: " + path);
}

ViTModel load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw PathError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(f, line) || line != "vitlab-checkpoint-v1")
        throw FormatError("bad checkpoint magic in " + path);
    std::map<std::string, std::string> kv;
    while (std::getline(f, line)) {
        if (line == "tensors") break;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("bad checkpoint header line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (line != "tensors") throw FormatError("checkpoint missing tensors section: " + path);
    auto geti = [&](const std::string& k) {
        auto it = kv.find(k);
        if (it == kv.end()) throw FormatError("checkpoint missing key " + k);
        return std::stoll(it->second);
    };
    ViTConfig cfg;
    cfg.image_size = geti("image_size");
    cfg.patch_size = geti("patch_size");
    cfg.embed_dim = geti("embed_dim");
    cfg.layers = geti("layers");
    cfg.heads = geti("heads");
    cfg.mlp_dim = geti("mlp_dim");
    cfg.num_classes = geti("num_classes");
    cfg.dropout = std::stod(kv.at("dropout"));
    cfg.validate();

    ViTModel model = ViTModel::init(cfg, 0);
    for (auto& [name, p] : model.named_params()) {
        f.read(reinterpret_cast<char*>(p->val->data.data()),
               static_cast<std::streamsize>(p->val->data.size() * sizeof(float)));
        if (!f) throw FormatError("checkpoint truncated while reading " + name + ": " + path);
    }
    char extra;
    if (f.read(&extra, 1)) throw FormatError("checkpoint has trailing bytes: " + path);
    return model;
}

// ---------------------------------------------------------------------------

template struct ViTModelT<float>;
template struct ViTModelT<double>;

template VarT<float> patchify_embed<float>(TapeT<float>*, const TensorT<float>&, const ViTModelT<float>&);
template VarT<double> patchify_embed<double>(TapeT<double>*, const TensorT<double>&, const ViTModelT<double>&);

template std::pair<VarT<float>, TensorT<float>> multi_head_attention<float>(
    TapeT<float>*, const VarT<float>&, const ViTModelT<float>::Block&, int64_t);
template std::pair<VarT<double>, TensorT<double>> multi_head_attention<double>(
    TapeT<double>*, const VarT<double>&, const ViTModelT<double>::Block&, int64_t);

template ForwardVars<float> forward_batch<float>(TapeT<float>*, const ViTModelT<float>&, const TensorT<float>&,
                                                 bool, SplitMix64*);
template ForwardVars<double> forward_batch<double>(TapeT<double>*, const ViTModelT<double>&,
                                                   const TensorT<double>&, bool, SplitMix64*);

}  // namespace vitlab
