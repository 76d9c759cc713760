#pragma once

// Hierarchical user/product attention network.
//
// A review is encoded twice: once by an encoder whose word- and
// sentence-level attention is conditioned on the user embedding, once by
// an encoder conditioned on the product embedding. Each encoder runs a
// word BiLSTM per sentence, pools the word states with attention into a
// sentence vector, runs a sentence BiLSTM and pools again into a document
// vector. The two document vectors are concatenated for the main softmax
// head; each one also feeds an auxiliary head used only by the loss.

#include "huapa/autodiff.hpp"
#include "huapa/data.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace huapa {

struct ModelDims {
    std::size_t word = 200;
    std::size_t user = 200;
    std::size_t product = 200;
    std::size_t hidden = 100;  // per LSTM direction
    std::size_t attention = 100;
    std::size_t classes = 5;

    bool operator==(const ModelDims&) const = default;
};

enum class Variant {
    huapa,         // user and product encoders, three heads
    hua,           // user encoder only
    hpa,           // product encoder only
    no_attention,  // one encoder with mean pooling at both levels
};

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view name);

struct LstmParams {
    const ad::Parameter* gates_w = nullptr;  // [3H x (H+D)], rows i, f, o
    const ad::Parameter* gates_b = nullptr;  // [3H]
    const ad::Parameter* cell_w = nullptr;   // [H x (H+D)]
    const ad::Parameter* cell_b = nullptr;   // [H]

    std::size_t hidden() const { return cell_b->size(); }
    std::size_t input() const { return cell_w->shape().cols - hidden(); }
};

// score(h) = v . tanh(hidden_w h + context_w c + bias)
struct AttentionParams {
    const ad::Parameter* score = nullptr;      // v [A]
    const ad::Parameter* hidden_w = nullptr;   // [A x 2H]
    const ad::Parameter* context_w = nullptr;  // [A x E]
    const ad::Parameter* bias = nullptr;       // [A]
};

enum class ContextKind { user, product, none };

struct BranchParams {
    std::string name;
    ContextKind context = ContextKind::none;
    LstmParams word_fwd, word_bwd;
    LstmParams sentence_fwd, sentence_bwd;
    // Absent for the mean-pooling encoder.
    std::optional<AttentionParams> word_attention;
    std::optional<AttentionParams> sentence_attention;
};

struct HeadParams {
    const ad::Parameter* weight = nullptr;  // [C x in]
    const ad::Parameter* bias = nullptr;    // [C]
};

struct VocabularySizes {
    std::size_t words = 0;
    std::size_t users = 0;
    std::size_t products = 0;
};

class HuapaModel {
public:
    HuapaModel(const ModelDims& dims, Variant variant, const VocabularySizes& sizes);
    HuapaModel(const HuapaModel&) = delete;
    HuapaModel& operator=(const HuapaModel&) = delete;

    const ModelDims& dims() const noexcept { return m_dims; }
    Variant variant() const noexcept { return m_variant; }
    const VocabularySizes& vocabulary_sizes() const noexcept { return m_sizes; }

    ad::ParameterSet& params() noexcept { return m_params; }
    const ad::ParameterSet& params() const noexcept { return m_params; }

    const ad::Parameter& word_embeddings() const { return *m_word_embeddings; }
    const ad::Parameter* user_embeddings() const { return m_user_embeddings; }
    const ad::Parameter* product_embeddings() const { return m_product_embeddings; }

    const std::vector<BranchParams>& branches() const noexcept { return m_branches; }
    const HeadParams& head() const noexcept { return m_head; }
    const std::optional<HeadParams>& user_head() const noexcept { return m_user_head; }
    const std::optional<HeadParams>& product_head() const noexcept { return m_product_head; }

    // Weight matrices and user/product embeddings U(-range, range), biases
    // zero. Word embeddings are left alone.
    void init_uniform(std::uint64_t seed, double range = 0.01);
    void set_word_embeddings(const EmbeddingTable& table);

private:
    LstmParams add_lstm(const std::string& prefix, std::size_t input, std::size_t hidden);
    AttentionParams add_attention(const std::string& prefix, std::size_t context_dim);
    HeadParams add_head(const std::string& prefix, std::size_t input);

    ModelDims m_dims;
    Variant m_variant;
    VocabularySizes m_sizes;
    ad::ParameterSet m_params;
    ad::Parameter* m_word_embeddings = nullptr;
    ad::Parameter* m_user_embeddings = nullptr;
    ad::Parameter* m_product_embeddings = nullptr;
    std::vector<BranchParams> m_branches;
    HeadParams m_head;
    std::optional<HeadParams> m_user_head;
    std::optional<HeadParams> m_product_head;
};

struct ViewTrace {
    // One weight list per grid row (zeros on padded positions and rows).
    std::vector<std::vector<double>> words;
    std::vector<double> sentences;
};

struct AttentionTrace {
    std::optional<ViewTrace> user;
    std::optional<ViewTrace> product;
};

struct ForwardOutput {
    ad::Value p;          // main head over [d_user; d_product]
    ad::Value p_user;     // auxiliary heads; invalid for single-encoder variants
    ad::Value p_product;
    ad::Value d_user;
    ad::Value d_product;
    AttentionTrace trace;
};

struct LstmState {
    ad::Value h;
    ad::Value c;
};

LstmState lstm_step(ad::Tape& tape, const LstmParams& params, ad::Value x, ad::Value h_prev, ad::Value c_prev);

// Rows t < valid_len hold [forward h_t; backward h_t]; padded rows are zero
// and never enter either recurrence. Entries of xs past valid_len may be
// invalid handles.
ad::Value bilstm_encode(ad::Tape& tape, const LstmParams& fwd, const LstmParams& bwd, std::span<const ad::Value> xs,
                        std::size_t valid_len);

struct Pooled {
    ad::Value vector;   // [1 x 2H]
    ad::Value weights;  // [1 x L]
};

Pooled attention_pool(ad::Tape& tape, const AttentionParams& params, ad::Value hidden, ad::Value context,
                      const std::vector<bool>& mask);
Pooled mean_pool(ad::Tape& tape, ad::Value hidden, const std::vector<bool>& mask);

struct ViewEncoding {
    ad::Value document;                    // [1 x 2H]
    std::vector<ad::Value> word_weights;   // per grid row; invalid for padded rows
    ad::Value sentence_weights;
};

// `context` is the user or product embedding (invalid for the mean-pooling
// encoder) and conditions attention at both levels.
ViewEncoding encode_document_view(ad::Tape& tape, const BranchParams& branch, const ad::Parameter& word_embeddings,
                                  const DocGrid& doc, ad::Value context);

ForwardOutput forward_huapa(ad::Tape& tape, const HuapaModel& model, const DocGrid& doc);

struct LossWeights {
    double main = 0.4;
    double user = 0.3;
    double product = 0.3;
};

struct CombinedLoss {
    ad::Value total;
    // Per-head cross-entropies; invalid when the head does not exist.
    std::array<ad::Value, 3> terms;
};

// Weighted sum of the three head cross-entropies. Variants with a single
// encoder have only the main head and train on its cross-entropy alone.
CombinedLoss combined_loss(ad::Tape& tape, const ForwardOutput& out, std::size_t gold, const LossWeights& weights);

// argmax of the main head; ties go to the lowest class.
std::size_t predict(const ForwardOutput& out);
std::size_t argmax(std::span<const double> values);

}  // namespace huapa
