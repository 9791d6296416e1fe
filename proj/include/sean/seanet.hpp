#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sean/corpus.hpp"
#include "sean/error.hpp"
#include "sean/tensor.hpp"
#include "sean/types.hpp"

namespace sean {

using EncodedDoc = std::vector<std::vector<std::int32_t>>;

struct ModelDims {
    std::size_t n_users = 0;
    std::size_t embed = 300;   // word embedding width D
    std::size_t hidden = 64;   // h
    std::size_t filters = 50;  // r, per kernel
    std::vector<std::size_t> windows{1, 2, 3, 4, 5, 6};
};

/// Switches for the ablation variants plus regularisation knobs.
struct ModelOptions {
    bool social = true;            // false: only the user's own embedding
    bool social_attention = true;  // false: uniform mean over self + friends
    bool cnn = true;               // false: sentence = mean word embedding
    bool gru = true;               // false: sentence vectors pass straight to attention
    double dropout = 0.2;
    double leaky_slope = 0.01;
};

inline std::size_t sentence_width(const ModelDims& d, const ModelOptions& o) {
    return o.cnn ? d.windows.size() * d.filters : d.embed;
}

/// Width of the per-sentence encoder output and of the document vector.
/// Without the GRU this is the sentence width, which is equivalent to
/// zero-padding the sentence vectors up to 2h.
inline std::size_t encoder_width(const ModelDims& d, const ModelOptions& o) {
    return o.gru ? 2 * d.hidden : sentence_width(d, o);
}

struct GruParams {
    Tensor wz, wr, wn;  // h x in
    Tensor uz, ur, un;  // h x h
    Tensor bz, br, bn;  // 1 x h
};

struct SocialParams {
    Tensor wy;  // h x h
    Tensor w;   // 1 x 2h
};

struct SeanParams {
    Tensor user_word;  // A,  n_users x h
    Tensor user_sent;  // A', n_users x h
    std::vector<Tensor> conv_w;  // per kernel: r x (g * D)
    std::vector<Tensor> conv_b;  // per kernel: 1 x r
    Tensor word_proj, word_proj_b;  // h x r, 1 x h
    GruParams gru_fw, gru_bw;
    Tensor sent_proj, sent_proj_b;  // h x enc, 1 x h
    SocialParams social_word, social_sent;
    Tensor out_w, out_b;  // 1 x enc, 1 x 1

    /// Calls f(name, tensor) for every tensor in a fixed order.
    template <class F>
    void visit(F&& f) { visit_impl(*this, f); }
    template <class F>
    void visit(F&& f) const { visit_impl(*this, f); }

    SeanParams zeros_like() const {
        SeanParams z = *this;
        z.zero();
        return z;
    }

    void zero() {
        visit([](const std::string&, Tensor& t) { t.zero(); });
    }

    friend bool operator==(const SeanParams&, const SeanParams&) = default;

private:
    template <class Self, class F>
    static void visit_impl(Self& s, F& f) {
        f(std::string("user_word"), s.user_word);
        f(std::string("user_sent"), s.user_sent);
        for (std::size_t k = 0; k < s.conv_w.size(); ++k) {
            f("conv_w." + std::to_string(k), s.conv_w[k]);
            f("conv_b." + std::to_string(k), s.conv_b[k]);
        }
        f(std::string("word_proj"), s.word_proj);
        f(std::string("word_proj_b"), s.word_proj_b);
        auto gru = [&](const std::string& p, auto& g) {
            f(p + ".wz", g.wz);
            f(p + ".wr", g.wr);
            f(p + ".wn", g.wn);
            f(p + ".uz", g.uz);
            f(p + ".ur", g.ur);
            f(p + ".un", g.un);
            f(p + ".bz", g.bz);
            f(p + ".br", g.br);
            f(p + ".bn", g.bn);
        };
        gru("gru_fw", s.gru_fw);
        gru("gru_bw", s.gru_bw);
        f(std::string("sent_proj"), s.sent_proj);
        f(std::string("sent_proj_b"), s.sent_proj_b);
        f(std::string("social_word.wy"), s.social_word.wy);
        f(std::string("social_word.w"), s.social_word.w);
        f(std::string("social_sent.wy"), s.social_sent.wy);
        f(std::string("social_sent.w"), s.social_sent.w);
        f(std::string("out_w"), s.out_w);
        f(std::string("out_b"), s.out_b);
    }
};

/// Xavier-normal weights, normal user embeddings, zero biases.
inline SeanParams init_params(const ModelDims& dims, const ModelOptions& opt, std::uint64_t seed,
                              double user_std = 1.0) {
    if (dims.hidden == 0 || dims.filters == 0 || dims.embed == 0 || dims.windows.empty())
        throw ConfigError("model dimensions must be positive");
    for (auto g : dims.windows)
        if (g == 0) throw ConfigError("convolution window must be >= 1");
    const std::size_t h = dims.hidden, r = dims.filters, D = dims.embed;
    const std::size_t in = sentence_width(dims, opt), enc = encoder_width(dims, opt);
    std::mt19937_64 rng(seed);
    SeanParams p;

    std::normal_distribution<double> user_dist(0.0, user_std);
    p.user_word.resize(dims.n_users, h);
    p.user_sent.resize(dims.n_users, h);
    for (double& x : p.user_word.data) x = user_dist(rng);
    for (double& x : p.user_sent.data) x = user_dist(rng);

    for (std::size_t g : dims.windows) {
        Tensor w(r, g * D);
        xavier_normal(w, g * D, r, rng);
        p.conv_w.push_back(std::move(w));
        p.conv_b.emplace_back(1, r);
    }
    p.word_proj.resize(h, r);
    xavier_normal(p.word_proj, r, h, rng);
    p.word_proj_b.resize(1, h);

    for (GruParams* g : {&p.gru_fw, &p.gru_bw}) {
        for (Tensor* t : {&g->wz, &g->wr, &g->wn}) {
            t->resize(h, in);
            xavier_normal(*t, in, h, rng);
        }
        for (Tensor* t : {&g->uz, &g->ur, &g->un}) {
            t->resize(h, h);
            xavier_normal(*t, h, h, rng);
        }
        for (Tensor* t : {&g->bz, &g->br, &g->bn}) t->resize(1, h);
    }
    p.sent_proj.resize(h, enc);
    xavier_normal(p.sent_proj, enc, h, rng);
    p.sent_proj_b.resize(1, h);
    for (SocialParams* s : {&p.social_word, &p.social_sent}) {
        s->wy.resize(h, h);
        xavier_normal(s->wy, h, h, rng);
        s->w.resize(1, 2 * h);
        xavier_normal(s->w, 2 * h, 1, rng);
    }
    p.out_w.resize(1, enc);
    xavier_normal(p.out_w, enc, 1, rng);
    p.out_b.resize(1, 1);
    return p;
}

// --- building blocks -----------------------------------------------------------

/// Convolution of one kernel over a sentence. Sentences shorter than the
/// window are zero-padded on the right, so there is always >= 1 position.
/// Writes pre-activations and relu features, both positions x r.
inline void conv_features(std::span<const std::int32_t> tokens, const Vocabulary& vocab, const Tensor& kernel,
                          const Tensor& bias, std::size_t window, Tensor& pre, Tensor& feat) {
    const std::size_t D = vocab.width();
    const std::size_t J = tokens.size();
    const std::size_t P = J >= window ? J - window + 1 : 1;
    const std::size_t r = kernel.rows;
    pre.resize(P, r);
    feat.resize(P, r);
    for (std::size_t j = 0; j < P; ++j) {
        double* out = pre.row(j);
        for (std::size_t c = 0; c < r; ++c) out[c] = bias.data[c];
        for (std::size_t t = 0; t < window && j + t < J; ++t) {
            const std::int32_t tok = tokens[j + t];
            if (tok == 0) continue;
            const double* e = vocab.row(tok);
            for (std::size_t c = 0; c < r; ++c) out[c] += linalg::dot(kernel.row(c) + t * D, e, D);
        }
        double* f = feat.row(j);
        for (std::size_t c = 0; c < r; ++c) f[c] = out[c] > 0.0 ? out[c] : 0.0;
    }
}

/// tanh(W f + b) for every feature row.
inline void project_features(const Tensor& feat, const Tensor& w, const Tensor& b, Tensor& proj) {
    proj.resize(feat.rows, w.rows);
    for (std::size_t j = 0; j < feat.rows; ++j) {
        double* out = proj.row(j);
        for (std::size_t i = 0; i < w.rows; ++i) out[i] = std::tanh(b.data[i] + linalg::dot(w.row(i), feat.row(j), w.cols));
    }
}

/// Attention weights come from the projected features; the weighted sum is
/// taken over the raw features. Writes feat.cols values to `out`.
inline void word_attention(const Tensor& feat, const Tensor& proj, const double* query, std::vector<double>& alpha,
                           double* out) {
    alpha.resize(feat.rows);
    for (std::size_t j = 0; j < feat.rows; ++j) alpha[j] = linalg::dot(query, proj.row(j), proj.cols);
    linalg::softmax(alpha);
    std::fill(out, out + feat.cols, 0.0);
    for (std::size_t j = 0; j < feat.rows; ++j) linalg::axpy(alpha[j], feat.row(j), out, feat.cols);
}

/// Per-step gate values of one GRU direction, indexed by sentence.
struct GruTrace {
    Tensor z, r, n, hprev, out;  // all I x h
};

/// Standard GRU: z, r sigmoid gates; n = tanh(Wn x + Un (r * h) + bn);
/// h' = (1 - z) * n + z * h. Zero initial state.
inline void gru_run(const GruParams& p, const Tensor& inputs, bool reverse, GruTrace& tr) {
    const std::size_t I = inputs.rows, h = p.uz.rows;
    for (Tensor* t : {&tr.z, &tr.r, &tr.n, &tr.hprev, &tr.out}) t->resize(I, h);
    std::vector<double> state(h, 0.0), q(h);
    for (std::size_t step = 0; step < I; ++step) {
        const std::size_t i = reverse ? I - 1 - step : step;
        const double* x = inputs.row(i);
        double* z = tr.z.row(i);
        double* r = tr.r.row(i);
        double* n = tr.n.row(i);
        std::copy(state.begin(), state.end(), tr.hprev.row(i));
        for (std::size_t k = 0; k < h; ++k) {
            z[k] = linalg::sigmoid(p.bz.data[k] + linalg::dot(p.wz.row(k), x, p.wz.cols) +
                                   linalg::dot(p.uz.row(k), state.data(), h));
            r[k] = linalg::sigmoid(p.br.data[k] + linalg::dot(p.wr.row(k), x, p.wr.cols) +
                                   linalg::dot(p.ur.row(k), state.data(), h));
        }
        for (std::size_t k = 0; k < h; ++k) q[k] = r[k] * state[k];
        for (std::size_t k = 0; k < h; ++k)
            n[k] = std::tanh(p.bn.data[k] + linalg::dot(p.wn.row(k), x, p.wn.cols) + linalg::dot(p.un.row(k), q.data(), h));
        for (std::size_t k = 0; k < h; ++k) state[k] = (1.0 - z[k]) * n[k] + z[k] * state[k];
        std::copy(state.begin(), state.end(), tr.out.row(i));
    }
}

/// Bidirectional encoding: row i is forward state i followed by backward state i.
inline void sentence_encode(const GruParams& fw, const GruParams& bw, const Tensor& inputs, GruTrace& tf, GruTrace& tb,
                            Tensor& states) {
    gru_run(fw, inputs, false, tf);
    gru_run(bw, inputs, true, tb);
    const std::size_t h = fw.uz.rows;
    states.resize(inputs.rows, 2 * h);
    for (std::size_t i = 0; i < inputs.rows; ++i) {
        std::copy(tf.out.row(i), tf.out.row(i) + h, states.row(i));
        std::copy(tb.out.row(i), tb.out.row(i) + h, states.row(i) + h);
    }
}

/// g_i = tanh(W_s h_i + b_s), beta = softmax(x_s . g_i), d = sum beta_i h_i.
inline void sentence_attention(const Tensor& states, const Tensor& w, const Tensor& b, const double* query, Tensor& proj,
                               std::vector<double>& beta, std::vector<double>& doc) {
    project_features(states, w, b, proj);
    beta.resize(states.rows);
    for (std::size_t i = 0; i < states.rows; ++i) beta[i] = linalg::dot(query, proj.row(i), proj.cols);
    linalg::softmax(beta);
    doc.assign(states.cols, 0.0);
    for (std::size_t i = 0; i < states.rows; ++i) linalg::axpy(beta[i], states.row(i), doc.data(), states.cols);
}

struct SocialTrace {
    std::vector<UserId> members;  // self first, then friends
    Tensor z;                     // W_y y_j per member
    std::vector<double> pre;      // w . [z_0 || z_j] before LeakyReLU
    std::vector<double> alpha;
    std::vector<double> x;
};

/// alpha_j = softmax(LeakyReLU(w . [W_y u || W_y y_j])), x = sum alpha_j W_y y_j
/// over self plus the friend list. With `attend` false the weights are uniform.
inline void social_attention(const Tensor& table, const SocialParams& p, UserId u, std::span<const UserId> friends,
                             bool attend, double slope, SocialTrace& tr) {
    const std::size_t h = p.wy.rows;
    tr.members.clear();
    tr.members.push_back(u);
    tr.members.insert(tr.members.end(), friends.begin(), friends.end());
    for (UserId m : tr.members)
        if (m.index() >= table.rows) throw LookupError("user id " + std::to_string(m.value) + " has no embedding");
    const std::size_t J = tr.members.size();
    tr.z.resize(J, h);
    for (std::size_t j = 0; j < J; ++j) linalg::gemv(p.wy, table.row(tr.members[j].index()), tr.z.row(j));
    tr.pre.assign(J, 0.0);
    tr.alpha.assign(J, 1.0 / static_cast<double>(J));
    if (attend) {
        const double self = linalg::dot(p.w.data.data(), tr.z.row(0), h);
        for (std::size_t j = 0; j < J; ++j) {
            tr.pre[j] = self + linalg::dot(p.w.data.data() + h, tr.z.row(j), h);
            tr.alpha[j] = tr.pre[j] > 0.0 ? tr.pre[j] : slope * tr.pre[j];
        }
        linalg::softmax(tr.alpha);
    }
    tr.x.assign(h, 0.0);
    for (std::size_t j = 0; j < J; ++j) linalg::axpy(tr.alpha[j], tr.z.row(j), tr.x.data(), h);
}

/// Backward of social_attention given dL/dx; accumulates parameter and embedding-row gradients.
inline void social_attention_backward(const Tensor& table, const SocialParams& p, const SocialTrace& tr,
                                      const double* dx, bool attend, double slope, Tensor& dtable, SocialParams& dp) {
    const std::size_t h = p.wy.rows, J = tr.members.size();
    Tensor dz(J, h);
    std::vector<double> dalpha(J);
    for (std::size_t j = 0; j < J; ++j) {
        linalg::axpy(tr.alpha[j], dx, dz.row(j), h);
        dalpha[j] = linalg::dot(dx, tr.z.row(j), h);
    }
    if (attend) {
        std::vector<double> dl(J);
        linalg::softmax_backward(tr.alpha, dalpha, dl);
        double dsum = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            const double da = dl[j] * (tr.pre[j] > 0.0 ? 1.0 : slope);
            dsum += da;
            linalg::axpy(da, tr.z.row(j), dp.w.data.data() + h, h);
            linalg::axpy(da, p.w.data.data() + h, dz.row(j), h);
        }
        linalg::axpy(dsum, tr.z.row(0), dp.w.data.data(), h);
        linalg::axpy(dsum, p.w.data.data(), dz.row(0), h);
    }
    for (std::size_t j = 0; j < J; ++j) {
        const double* y = table.row(tr.members[j].index());
        linalg::outer_add(dp.wy, dz.row(j), y);
        linalg::gemv_t(p.wy, dz.row(j), dtable.row(tr.members[j].index()));
    }
}

// --- full scorer ---------------------------------------------------------------

/// Binary cross-entropy with p clamped to [1e-7, 1 - 1e-7].
inline double bce_loss(double p, int y) {
    const double q = std::clamp(p, 1e-7, 1.0 - 1e-7);
    return -(y ? std::log(q) : std::log(1.0 - q));
}

/// Forward/backward engine for one (user, document, friend paths) sample.
/// Holds the activations of the last forward call so backward can reuse them.
/// Not thread-safe; use one instance per worker.
class SeanNet {
public:
    SeanNet(ModelDims dims, ModelOptions opt) : dims_(std::move(dims)), opt_(opt) {}

    const ModelDims& dims() const { return dims_; }
    const ModelOptions& options() const { return opt_; }

    /// Averaged probability over the friend lists (one per path). An empty
    /// `paths` argument, or social=false, uses a single path without friends.
    /// A non-null rng enables dropout.
    double forward(const SeanParams& params, const Vocabulary& vocab, const EncodedDoc& doc, UserId u,
                   const std::vector<std::vector<UserId>>& paths, std::mt19937_64* rng = nullptr);

    /// Gradients of bce_loss(forward(...), label) accumulated into grads.
    void backward(const SeanParams& params, const Vocabulary& vocab, int label, SeanParams& grads);

    double probability() const { return prob_; }
    std::size_t path_count() const { return paths_.size(); }
    double path_probability(std::size_t b) const { return paths_[b].p; }
    const SocialTrace& word_social(std::size_t b) const { return paths_[b].social_word; }
    const SocialTrace& sentence_social(std::size_t b) const { return paths_[b].social_sent; }
    const std::vector<double>& sentence_weights(std::size_t b) const { return paths_[b].beta; }
    const std::vector<double>& word_weights(std::size_t b, std::size_t sentence, std::size_t kernel) const {
        return paths_[b].alpha[sentence * dims_.windows.size() + kernel];
    }
    const Tensor& sentence_states(std::size_t b) const { return paths_[b].states; }
    const std::vector<double>& document_vector(std::size_t b) const { return paths_[b].doc; }

    /// Signs of every ReLU / LeakyReLU input of the last forward call. Two
    /// calls with equal patterns lie on the same differentiable piece.
    std::vector<bool> activation_pattern() const {
        std::vector<bool> out;
        for (const auto& kc : kernels_)
            for (double v : kc.pre.data) out.push_back(v > 0.0);
        for (const auto& pc : paths_) {
            for (double v : pc.social_word.pre) out.push_back(v > 0.0);
            for (double v : pc.social_sent.pre) out.push_back(v > 0.0);
        }
        return out;
    }

private:
    struct KernelCache {
        Tensor pre, feat, proj;
        Tensor dfeat, dproj;
    };
    struct PathCache {
        SocialTrace social_word, social_sent;
        std::vector<std::vector<double>> alpha;  // per sentence x kernel
        Tensor s, s_mask, s_in;                  // raw, mask, after dropout
        GruTrace fw, bw;
        Tensor states;
        Tensor sproj;
        std::vector<double> beta, doc, doc_mask, doc_in;
        double logit = 0.0, p = 0.5;
    };

    static void dropout_mask(std::span<double> mask, double rate, std::mt19937_64* rng) {
        if (!rng || rate <= 0.0) {
            std::fill(mask.begin(), mask.end(), 1.0);
            return;
        }
        std::bernoulli_distribution keep(1.0 - rate);
        const double scale = 1.0 / (1.0 - rate);
        for (double& m : mask) m = keep(*rng) ? scale : 0.0;
    }

    void gru_backward(const GruParams& p, const GruTrace& tr, const Tensor& inputs, const Tensor& dstates,
                      std::size_t offset, bool reverse, GruParams& g, Tensor& dinputs) const;

    ModelDims dims_;
    ModelOptions opt_;
    const EncodedDoc* doc_ = nullptr;
    UserId user_;
    std::vector<KernelCache> kernels_;  // sentence x kernel
    Tensor mean_embed_;                  // sentence vectors when cnn=false
    std::vector<PathCache> paths_;
    double prob_ = 0.5;
};

inline double SeanNet::forward(const SeanParams& params, const Vocabulary& vocab, const EncodedDoc& doc, UserId u,
                               const std::vector<std::vector<UserId>>& paths, std::mt19937_64* rng) {
    if (doc.empty()) throw DataError("cannot score an empty document");
    const std::size_t I = doc.size(), K = dims_.windows.size(), r = dims_.filters, h = dims_.hidden;
    const std::size_t in = sentence_width(dims_, opt_);
    doc_ = &doc;
    user_ = u;

    if (opt_.cnn) {
        kernels_.resize(I * K);
        for (std::size_t i = 0; i < I; ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                auto& kc = kernels_[i * K + k];
                conv_features(doc[i], vocab, params.conv_w[k], params.conv_b[k], dims_.windows[k], kc.pre, kc.feat);
                project_features(kc.feat, params.word_proj, params.word_proj_b, kc.proj);
            }
        }
    } else {
        mean_embed_.resize(I, vocab.width());
        for (std::size_t i = 0; i < I; ++i) {
            const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(doc[i].size(), 1));
            for (auto tok : doc[i]) linalg::axpy(inv, vocab.row(tok), mean_embed_.row(i), vocab.width());
        }
    }

    static const std::vector<UserId> kNoFriends;
    const std::size_t B = (!opt_.social || paths.empty()) ? 1 : paths.size();
    paths_.resize(B);
    prob_ = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        auto& pc = paths_[b];
        const std::vector<UserId>& friends = (!opt_.social || paths.empty()) ? kNoFriends : paths[b];
        social_attention(params.user_sent, params.social_sent, u, friends, opt_.social_attention, opt_.leaky_slope,
                         pc.social_sent);
        pc.s.resize(I, in);
        if (opt_.cnn) {
            social_attention(params.user_word, params.social_word, u, friends, opt_.social_attention, opt_.leaky_slope,
                             pc.social_word);
            pc.alpha.resize(I * K);
            for (std::size_t i = 0; i < I; ++i)
                for (std::size_t k = 0; k < K; ++k) {
                    const auto& kc = kernels_[i * K + k];
                    word_attention(kc.feat, kc.proj, pc.social_word.x.data(), pc.alpha[i * K + k], pc.s.row(i) + k * r);
                }
        } else {
            pc.s.data = mean_embed_.data;
        }
        pc.s_mask.resize(I, in);
        dropout_mask(pc.s_mask.data, opt_.dropout, rng);
        pc.s_in.resize(I, in);
        for (std::size_t t = 0; t < pc.s.size(); ++t) pc.s_in.data[t] = pc.s.data[t] * pc.s_mask.data[t];

        if (opt_.gru) {
            sentence_encode(params.gru_fw, params.gru_bw, pc.s_in, pc.fw, pc.bw, pc.states);
        } else {
            pc.states = pc.s_in;
        }
        sentence_attention(pc.states, params.sent_proj, params.sent_proj_b, pc.social_sent.x.data(), pc.sproj, pc.beta,
                           pc.doc);
        pc.doc_mask.resize(pc.doc.size());
        dropout_mask(pc.doc_mask, opt_.dropout, rng);
        pc.doc_in.resize(pc.doc.size());
        for (std::size_t t = 0; t < pc.doc.size(); ++t) pc.doc_in[t] = pc.doc[t] * pc.doc_mask[t];
        pc.logit = params.out_b.data[0] + linalg::dot(params.out_w.data.data(), pc.doc_in.data(), pc.doc_in.size());
        pc.p = linalg::sigmoid(pc.logit);
        prob_ += pc.p;
    }
    prob_ /= static_cast<double>(B);
    (void)h;
    return prob_;
}

inline void SeanNet::gru_backward(const GruParams& p, const GruTrace& tr, const Tensor& inputs, const Tensor& dstates,
                                  std::size_t offset, bool reverse, GruParams& g, Tensor& dinputs) const {
    const std::size_t I = inputs.rows, h = p.uz.rows, in = inputs.cols;
    std::vector<double> carry(h, 0.0), dh(h), dn(h), dz(h), dan(h), daz(h), dar(h), dq(h), dr(h), q(h), dprev(h);
    for (std::size_t step = 0; step < I; ++step) {
        // walk the steps in the opposite order to the forward run
        const std::size_t i = reverse ? step : I - 1 - step;
        const double* x = inputs.row(i);
        const double* z = tr.z.row(i);
        const double* r = tr.r.row(i);
        const double* n = tr.n.row(i);
        const double* hp = tr.hprev.row(i);
        for (std::size_t k = 0; k < h; ++k) dh[k] = dstates(i, offset + k) + carry[k];
        for (std::size_t k = 0; k < h; ++k) {
            dn[k] = dh[k] * (1.0 - z[k]);
            dz[k] = dh[k] * (hp[k] - n[k]);
            dprev[k] = dh[k] * z[k];
            dan[k] = dn[k] * (1.0 - n[k] * n[k]);
            q[k] = r[k] * hp[k];
        }
        double* dx = dinputs.row(i);
        linalg::outer_add(g.wn, dan.data(), x);
        linalg::outer_add(g.un, dan.data(), q.data());
        linalg::axpy(1.0, dan.data(), g.bn.data.data(), h);
        linalg::gemv_t(p.wn, dan.data(), dx);
        std::fill(dq.begin(), dq.end(), 0.0);
        linalg::gemv_t(p.un, dan.data(), dq.data());
        for (std::size_t k = 0; k < h; ++k) {
            dr[k] = dq[k] * hp[k];
            dprev[k] += dq[k] * r[k];
            daz[k] = dz[k] * z[k] * (1.0 - z[k]);
            dar[k] = dr[k] * r[k] * (1.0 - r[k]);
        }
        linalg::outer_add(g.wz, daz.data(), x);
        linalg::outer_add(g.uz, daz.data(), hp);
        linalg::axpy(1.0, daz.data(), g.bz.data.data(), h);
        linalg::gemv_t(p.wz, daz.data(), dx);
        linalg::gemv_t(p.uz, daz.data(), dprev.data());
        linalg::outer_add(g.wr, dar.data(), x);
        linalg::outer_add(g.ur, dar.data(), hp);
        linalg::axpy(1.0, dar.data(), g.br.data.data(), h);
        linalg::gemv_t(p.wr, dar.data(), dx);
        linalg::gemv_t(p.ur, dar.data(), dprev.data());
        carry = dprev;
    }
    (void)in;
}

inline void SeanNet::backward(const SeanParams& params, const Vocabulary& vocab, int label, SeanParams& grads) {
    const EncodedDoc& doc = *doc_;
    const std::size_t I = doc.size(), K = dims_.windows.size(), r = dims_.filters, h = dims_.hidden;
    const std::size_t in = sentence_width(dims_, opt_);
    const std::size_t B = paths_.size();

    // dL/dp for the clamped BCE; zero where the clamp is active
    double dp = 0.0;
    if (prob_ > 1e-7 && prob_ < 1.0 - 1e-7) dp = label ? -1.0 / prob_ : 1.0 / (1.0 - prob_);

    if (opt_.cnn)
        for (auto& kc : kernels_) {
            kc.dfeat.resize(kc.feat.rows, kc.feat.cols);
            kc.dproj.resize(kc.proj.rows, kc.proj.cols);
        }

    Tensor dstates, ds;
    std::vector<double> ddoc, dbeta, de, dxs(h), dxw(h), dgi(h), dalpha, dsk;
    for (std::size_t b = 0; b < B; ++b) {
        auto& pc = paths_[b];
        const double dlogit = dp / static_cast<double>(B) * pc.p * (1.0 - pc.p);
        const std::size_t enc = pc.doc.size();

        grads.out_b.data[0] += dlogit;
        linalg::axpy(dlogit, pc.doc_in.data(), grads.out_w.data.data(), enc);
        ddoc.assign(enc, 0.0);
        for (std::size_t t = 0; t < enc; ++t) ddoc[t] = dlogit * params.out_w.data[t] * pc.doc_mask[t];

        // sentence attention
        dstates.resize(I, enc);
        dbeta.assign(I, 0.0);
        for (std::size_t i = 0; i < I; ++i) {
            dbeta[i] = linalg::dot(ddoc.data(), pc.states.row(i), enc);
            linalg::axpy(pc.beta[i], ddoc.data(), dstates.row(i), enc);
        }
        de.assign(I, 0.0);
        linalg::softmax_backward(pc.beta, dbeta, de);
        std::fill(dxs.begin(), dxs.end(), 0.0);
        for (std::size_t i = 0; i < I; ++i) {
            const double* gi = pc.sproj.row(i);
            linalg::axpy(de[i], gi, dxs.data(), h);
            for (std::size_t k = 0; k < h; ++k) dgi[k] = de[i] * pc.social_sent.x[k] * (1.0 - gi[k] * gi[k]);
            linalg::outer_add(grads.sent_proj, dgi.data(), pc.states.row(i));
            linalg::axpy(1.0, dgi.data(), grads.sent_proj_b.data.data(), h);
            linalg::gemv_t(params.sent_proj, dgi.data(), dstates.row(i));
        }

        // sentence encoder
        ds.resize(I, in);
        if (opt_.gru) {
            gru_backward(params.gru_fw, pc.fw, pc.s_in, dstates, 0, false, grads.gru_fw, ds);
            gru_backward(params.gru_bw, pc.bw, pc.s_in, dstates, h, true, grads.gru_bw, ds);
        } else {
            ds.data = dstates.data;
        }
        for (std::size_t t = 0; t < ds.size(); ++t) ds.data[t] *= pc.s_mask.data[t];

        // word attention
        if (opt_.cnn) {
            std::fill(dxw.begin(), dxw.end(), 0.0);
            const double* xw = pc.social_word.x.data();
            for (std::size_t i = 0; i < I; ++i)
                for (std::size_t k = 0; k < K; ++k) {
                    auto& kc = kernels_[i * K + k];
                    const auto& alpha = pc.alpha[i * K + k];
                    const double* dsk_ptr = ds.row(i) + k * r;
                    const std::size_t P = kc.feat.rows;
                    dalpha.assign(P, 0.0);
                    for (std::size_t j = 0; j < P; ++j) {
                        dalpha[j] = linalg::dot(dsk_ptr, kc.feat.row(j), r);
                        linalg::axpy(alpha[j], dsk_ptr, kc.dfeat.row(j), r);
                    }
                    dsk.assign(P, 0.0);
                    linalg::softmax_backward(alpha, dalpha, dsk);
                    for (std::size_t j = 0; j < P; ++j) {
                        linalg::axpy(dsk[j], kc.proj.row(j), dxw.data(), h);
                        linalg::axpy(dsk[j], xw, kc.dproj.row(j), h);
                    }
                }
            social_attention_backward(params.user_word, params.social_word, pc.social_word, dxw.data(),
                                      opt_.social_attention, opt_.leaky_slope, grads.user_word, grads.social_word);
        }
        social_attention_backward(params.user_sent, params.social_sent, pc.social_sent, dxs.data(),
                                  opt_.social_attention, opt_.leaky_slope, grads.user_sent, grads.social_sent);
    }

    if (!opt_.cnn) return;
    // projection and convolution, shared by all paths
    const std::size_t D = vocab.width();
    std::vector<double> dpre_p(h), dpre(r);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t k = 0; k < K; ++k) {
            auto& kc = kernels_[i * K + k];
            const std::size_t g = dims_.windows[k];
            const auto& tokens = doc[i];
            for (std::size_t j = 0; j < kc.feat.rows; ++j) {
                const double* pj = kc.proj.row(j);
                const double* dpj = kc.dproj.row(j);
                for (std::size_t c = 0; c < h; ++c) dpre_p[c] = dpj[c] * (1.0 - pj[c] * pj[c]);
                linalg::outer_add(grads.word_proj, dpre_p.data(), kc.feat.row(j));
                linalg::axpy(1.0, dpre_p.data(), grads.word_proj_b.data.data(), h);
                double* dfj = kc.dfeat.row(j);
                linalg::gemv_t(params.word_proj, dpre_p.data(), dfj);
                const double* pre = kc.pre.row(j);
                bool any = false;
                for (std::size_t c = 0; c < r; ++c) {
                    dpre[c] = pre[c] > 0.0 ? dfj[c] : 0.0;
                    any = any || dpre[c] != 0.0;
                }
                if (!any) continue;
                linalg::axpy(1.0, dpre.data(), grads.conv_b[k].data.data(), r);
                for (std::size_t t = 0; t < g && j + t < tokens.size(); ++t) {
                    if (tokens[j + t] == 0) continue;
                    const double* e = vocab.row(tokens[j + t]);
                    for (std::size_t c = 0; c < r; ++c)
                        if (dpre[c] != 0.0) linalg::axpy(dpre[c], e, grads.conv_w[k].row(c) + t * D, D);
                }
            }
        }
}

// --- checkpoint ------------------------------------------------------------------

/// Text archive: a header line, then per tensor `tensor <name> <rows> <cols>`
/// followed by one line of hex-float values per row. Round-trips bit-exactly.
inline void write_params(std::ostream& out, const SeanParams& params) {
    out << "sean-params 1\n";
    char buf[64];
    params.visit([&](const std::string& name, const Tensor& t) {
        out << "tensor " << name << ' ' << t.rows << ' ' << t.cols << '\n';
        for (std::size_t i = 0; i < t.rows; ++i) {
            for (std::size_t j = 0; j < t.cols; ++j) {
                auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), t(i, j), std::chars_format::hex);
                if (j) out << ' ';
                out.write(buf, end - buf);
            }
            out << '\n';
        }
    });
}

/// Reads an archive into `params`, whose tensor names and shapes must match.
inline void read_params(std::istream& in, SeanParams& params) {
    std::string line;
    if (!std::getline(in, line) || line != "sean-params 1") throw ParseError("not a parameter archive");
    std::map<std::string, Tensor> found;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream hs(line);
        std::string tag, name;
        std::size_t rows = 0, cols = 0;
        if (!(hs >> tag >> name >> rows >> cols) || tag != "tensor") throw ParseError("bad tensor header: " + line);
        Tensor t(rows, cols);
        for (std::size_t i = 0; i < rows; ++i) {
            if (!std::getline(in, line)) throw ParseError("truncated tensor " + name);
            const char* p = line.data();
            const char* end = line.data() + line.size();
            for (std::size_t j = 0; j < cols; ++j) {
                while (p < end && *p == ' ') ++p;
                auto [next, ec] = std::from_chars(p, end, t(i, j), std::chars_format::hex);
                if (ec != std::errc()) throw ParseError("bad value in tensor " + name);
                p = next;
            }
        }
        found.emplace(name, std::move(t));
    }
    params.visit([&](const std::string& name, Tensor& t) {
        auto it = found.find(name);
        if (it == found.end()) throw ParseError("archive lacks tensor " + name);
        if (it->second.rows != t.rows || it->second.cols != t.cols) throw ParseError("shape mismatch for tensor " + name);
        t = std::move(it->second);
    });
}

} // namespace sean
