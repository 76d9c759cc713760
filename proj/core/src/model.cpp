#include "huapa/model.hpp"

#include "huapa/error.hpp"

#include <random>

namespace huapa {

using ad::Tape;
using ad::Value;

std::string_view to_string(Variant variant)
{
    switch (variant) {
    case Variant::huapa: return "huapa";
    case Variant::hua: return "hua";
    case Variant::hpa: return "hpa";
    case Variant::no_attention: return "no-attention-baseline";
    }
    return "unknown";
}

Variant parse_variant(std::string_view name)
{
    for (Variant v : {Variant::huapa, Variant::hua, Variant::hpa, Variant::no_attention})
        if (to_string(v) == name) return v;
    fail(ErrorKind::config, "unknown model variant '" + std::string(name) +
                                "' (expected huapa, hua, hpa or no-attention-baseline)");
}

// ---- parameters ------------------------------------------------------------

HuapaModel::HuapaModel(const ModelDims& dims, Variant variant, const VocabularySizes& sizes)
  : m_dims(dims), m_variant(variant), m_sizes(sizes)
{
    for (std::size_t d : {dims.word, dims.user, dims.product, dims.hidden, dims.attention})
        if (d == 0) fail(ErrorKind::config, "model dimensions must be positive");
    if (dims.classes < 2) fail(ErrorKind::config, "model needs at least 2 classes");

    const std::size_t h2 = 2 * dims.hidden;
    m_word_embeddings = &m_params.add("word_embedding", {sizes.words, dims.word}, false);

    auto add_branch = [&](const std::string& name, ContextKind context, std::size_t context_dim) {
        BranchParams branch;
        branch.name = name;
        branch.context = context;
        branch.word_fwd = add_lstm(name + ".word_lstm.fwd", dims.word, dims.hidden);
        branch.word_bwd = add_lstm(name + ".word_lstm.bwd", dims.word, dims.hidden);
        if (context != ContextKind::none) branch.word_attention = add_attention(name + ".word_attention", context_dim);
        branch.sentence_fwd = add_lstm(name + ".sentence_lstm.fwd", h2, dims.hidden);
        branch.sentence_bwd = add_lstm(name + ".sentence_lstm.bwd", h2, dims.hidden);
        if (context != ContextKind::none)
            branch.sentence_attention = add_attention(name + ".sentence_attention", context_dim);
        m_branches.push_back(std::move(branch));
    };

    const bool with_user = variant == Variant::huapa || variant == Variant::hua;
    const bool with_product = variant == Variant::huapa || variant == Variant::hpa;
    if (with_user) m_user_embeddings = &m_params.add("user_embedding", {sizes.users, dims.user});
    if (with_product) m_product_embeddings = &m_params.add("product_embedding", {sizes.products, dims.product});
    if (with_user) add_branch("user", ContextKind::user, dims.user);
    if (with_product) add_branch("product", ContextKind::product, dims.product);
    if (variant == Variant::no_attention) add_branch("text", ContextKind::none, 0);

    m_head = add_head("head", h2 * m_branches.size());
    if (variant == Variant::huapa) {
        m_user_head = add_head("user_head", h2);
        m_product_head = add_head("product_head", h2);
    }
}

LstmParams HuapaModel::add_lstm(const std::string& prefix, std::size_t input, std::size_t hidden)
{
    LstmParams p;
    p.gates_w = &m_params.add(prefix + ".gates_weight", {3 * hidden, hidden + input});
    p.gates_b = &m_params.add(prefix + ".gates_bias", ad::Shape::vec(3 * hidden));
    p.cell_w = &m_params.add(prefix + ".cell_weight", {hidden, hidden + input});
    p.cell_b = &m_params.add(prefix + ".cell_bias", ad::Shape::vec(hidden));
    return p;
}

AttentionParams HuapaModel::add_attention(const std::string& prefix, std::size_t context_dim)
{
    AttentionParams p;
    p.score = &m_params.add(prefix + ".score", ad::Shape::vec(m_dims.attention));
    p.hidden_w = &m_params.add(prefix + ".hidden_weight", {m_dims.attention, 2 * m_dims.hidden});
    p.context_w = &m_params.add(prefix + ".context_weight", {m_dims.attention, context_dim});
    p.bias = &m_params.add(prefix + ".bias", ad::Shape::vec(m_dims.attention));
    return p;
}

HeadParams HuapaModel::add_head(const std::string& prefix, std::size_t input)
{
    HeadParams p;
    p.weight = &m_params.add(prefix + ".weight", {m_dims.classes, input});
    p.bias = &m_params.add(prefix + ".bias", ad::Shape::vec(m_dims.classes));
    return p;
}

void HuapaModel::init_uniform(std::uint64_t seed, double range)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(-range, range);
    for (ad::Parameter& p : m_params) {
        if (&p == m_word_embeddings) continue;
        const bool is_bias = p.name().ends_with("bias");
        for (double& x : p.data()) x = is_bias ? 0.0 : uniform(rng);
    }
}

void HuapaModel::set_word_embeddings(const EmbeddingTable& table)
{
    if (table.rows != m_word_embeddings->shape().rows || table.dim != m_word_embeddings->shape().cols) {
        fail(ErrorKind::config, "word embedding table is " + std::to_string(table.rows) + "x" +
                                    std::to_string(table.dim) + ", model expects " +
                                    ad::to_string(m_word_embeddings->shape()));
    }
    std::copy(table.values.begin(), table.values.end(), m_word_embeddings->data().begin());
}

// ---- forward ---------------------------------------------------------------

LstmState lstm_step(Tape& tape, const LstmParams& params, Value x, Value h_prev, Value c_prev)
{
    const std::size_t h = params.hidden();
    if (x.rows() != 1 || x.cols() != params.input() || h_prev.shape() != ad::Shape::vec(h) ||
        c_prev.shape() != ad::Shape::vec(h)) {
        fail(ErrorKind::shape, "lstm_step: got x " + ad::to_string(x.shape()) + ", h " +
                                   ad::to_string(h_prev.shape()) + ", c " + ad::to_string(c_prev.shape()) +
                                   " for input " + std::to_string(params.input()) + ", hidden " + std::to_string(h));
    }
    const Value hx = ad::concat_cols(tape, h_prev, x);
    const Value gates =
        ad::sigmoid(tape, ad::add_bias(tape, ad::matmul_nt(tape, hx, params.gates_w->value()), params.gates_b->value()));
    const Value input_gate = ad::slice_cols(tape, gates, 0, h);
    const Value forget_gate = ad::slice_cols(tape, gates, h, 2 * h);
    const Value output_gate = ad::slice_cols(tape, gates, 2 * h, 3 * h);
    const Value candidate =
        ad::tanh(tape, ad::add_bias(tape, ad::matmul_nt(tape, hx, params.cell_w->value()), params.cell_b->value()));
    const Value c = ad::elem_add(tape, ad::elem_mul(tape, forget_gate, c_prev), ad::elem_mul(tape, input_gate, candidate));
    const Value h_t = ad::elem_mul(tape, output_gate, ad::tanh(tape, c));
    return {h_t, c};
}

Value bilstm_encode(Tape& tape, const LstmParams& fwd, const LstmParams& bwd, std::span<const Value> xs,
                    std::size_t valid_len)
{
    if (valid_len == 0) fail(ErrorKind::shape, "bilstm_encode: empty sequence");
    if (valid_len > xs.size()) {
        fail(ErrorKind::shape, "bilstm_encode: valid length " + std::to_string(valid_len) + " exceeds " +
                                   std::to_string(xs.size()) + " positions");
    }
    const std::size_t h = fwd.hidden();
    std::vector<Value> forward(valid_len), backward(valid_len);

    LstmState state{tape.zeros(ad::Shape::vec(h)), tape.zeros(ad::Shape::vec(h))};
    for (std::size_t t = 0; t < valid_len; ++t) {
        state = lstm_step(tape, fwd, xs[t], state.h, state.c);
        forward[t] = state.h;
    }
    state = {tape.zeros(ad::Shape::vec(bwd.hidden())), tape.zeros(ad::Shape::vec(bwd.hidden()))};
    for (std::size_t t = valid_len; t-- > 0;) {
        state = lstm_step(tape, bwd, xs[t], state.h, state.c);
        backward[t] = state.h;
    }

    std::vector<Value> rows(xs.size());
    for (std::size_t t = 0; t < valid_len; ++t) rows[t] = ad::concat_cols(tape, forward[t], backward[t]);
    if (valid_len < xs.size()) {
        const Value pad = tape.zeros(ad::Shape::vec(h + bwd.hidden()));
        for (std::size_t t = valid_len; t < xs.size(); ++t) rows[t] = pad;
    }
    return ad::stack_rows(tape, rows);
}

Pooled attention_pool(Tape& tape, const AttentionParams& params, Value hidden, Value context,
                      const std::vector<bool>& mask)
{
    if (mask.size() != hidden.rows()) {
        fail(ErrorKind::shape, "attention_pool: mask length " + std::to_string(mask.size()) + " vs hidden " +
                                   ad::to_string(hidden.shape()));
    }
    const Value projected = ad::matmul_nt(tape, hidden, params.hidden_w->value());
    const Value context_term =
        ad::elem_add(tape, ad::matmul_nt(tape, context, params.context_w->value()), params.bias->value());
    const Value activated = ad::tanh(tape, ad::add_bias(tape, projected, context_term));
    const Value scores = ad::matmul_nt(tape, params.score->value(), activated);
    const Value weights = ad::masked_softmax(tape, scores, mask);
    return {ad::weighted_sum(tape, hidden, weights), weights};
}

Pooled mean_pool(Tape& tape, Value hidden, const std::vector<bool>& mask)
{
    if (mask.size() != hidden.rows()) {
        fail(ErrorKind::shape, "mean_pool: mask length " + std::to_string(mask.size()) + " vs hidden " +
                                   ad::to_string(hidden.shape()));
    }
    const auto n = static_cast<double>(std::count(mask.begin(), mask.end(), true));
    if (n == 0.0) fail(ErrorKind::shape, "mean_pool: empty support");
    std::vector<double> w(mask.size(), 0.0);
    for (std::size_t j = 0; j < mask.size(); ++j)
        if (mask[j]) w[j] = 1.0 / n;
    const Value weights = tape.constant(ad::Shape::vec(mask.size()), std::move(w));
    return {ad::weighted_sum(tape, hidden, weights), weights};
}

ViewEncoding encode_document_view(Tape& tape, const BranchParams& branch, const ad::Parameter& word_embeddings,
                                  const DocGrid& doc, Value context)
{
    if (doc.sentence_count() == 0) fail(ErrorKind::shape, "encode_document_view: document has no sentences");
    auto pool = [&](const std::optional<AttentionParams>& attention, Value hidden, const std::vector<bool>& mask) {
        return attention ? attention_pool(tape, *attention, hidden, context, mask) : mean_pool(tape, hidden, mask);
    };

    const Value table = word_embeddings.value();
    ViewEncoding out;
    out.word_weights.resize(doc.rows);
    std::vector<Value> sentences(doc.rows);
    std::vector<Value> words(doc.cols);
    for (std::size_t i = 0; i < doc.rows; ++i) {
        if (!doc.sentence_mask[i]) continue;
        const std::size_t len = doc.sentence_length(i);
        if (len == 0) fail(ErrorKind::shape, "encode_document_view: empty sentence " + std::to_string(i));
        for (std::size_t j = 0; j < doc.cols; ++j) {
            if (j < len) {
                const std::size_t id = static_cast<std::size_t>(doc.id(i, j));
                words[j] = ad::gather_rows(tape, table, std::span<const std::size_t>(&id, 1));
            } else {
                words[j] = Value();
            }
        }
        const Value hidden = bilstm_encode(tape, branch.word_fwd, branch.word_bwd, words, len);
        const Pooled pooled = pool(branch.word_attention, hidden, doc.word_mask[i]);
        sentences[i] = pooled.vector;
        out.word_weights[i] = pooled.weights;
    }

    const Value hidden =
        bilstm_encode(tape, branch.sentence_fwd, branch.sentence_bwd, sentences, doc.sentence_count());
    const Pooled pooled = pool(branch.sentence_attention, hidden, doc.sentence_mask);
    out.document = pooled.vector;
    out.sentence_weights = pooled.weights;
    return out;
}

namespace {

Value context_row(Tape& tape, const ad::Parameter* table, TokenId id, std::string_view what)
{
    if (id < 0 || static_cast<std::size_t>(id) >= table->shape().rows) {
        fail(ErrorKind::shape, "forward: " + std::string(what) + " id " + std::to_string(id) +
                                   " outside embedding table " + ad::to_string(table->shape()));
    }
    const auto row = static_cast<std::size_t>(id);
    return ad::gather_rows(tape, table->value(), std::span<const std::size_t>(&row, 1));
}

ViewTrace make_trace(const ViewEncoding& enc, const DocGrid& doc)
{
    ViewTrace trace;
    trace.words.resize(doc.rows);
    for (std::size_t i = 0; i < doc.rows; ++i) {
        if (enc.word_weights[i].valid()) {
            const auto w = enc.word_weights[i].data();
            trace.words[i].assign(w.begin(), w.end());
        } else {
            trace.words[i].assign(doc.cols, 0.0);
        }
    }
    const auto s = enc.sentence_weights.data();
    trace.sentences.assign(s.begin(), s.end());
    return trace;
}

Value classify(Tape& tape, const HeadParams& head, Value input)
{
    return ad::softmax(tape, ad::add_bias(tape, ad::matmul_nt(tape, input, head.weight->value()), head.bias->value()));
}

}  // namespace

ForwardOutput forward_huapa(Tape& tape, const HuapaModel& model, const DocGrid& doc)
{
    ForwardOutput out;
    std::vector<Value> views;
    for (const BranchParams& branch : model.branches()) {
        Value context;
        if (branch.context == ContextKind::user)
            context = context_row(tape, model.user_embeddings(), doc.user, "user");
        else if (branch.context == ContextKind::product)
            context = context_row(tape, model.product_embeddings(), doc.product, "product");

        const ViewEncoding enc = encode_document_view(tape, branch, model.word_embeddings(), doc, context);
        views.push_back(enc.document);
        if (branch.context == ContextKind::user) {
            out.d_user = enc.document;
            out.trace.user = make_trace(enc, doc);
        } else if (branch.context == ContextKind::product) {
            out.d_product = enc.document;
            out.trace.product = make_trace(enc, doc);
        }
    }

    const Value d = views.size() == 1 ? views.front() : ad::concat_cols(tape, views[0], views[1]);
    out.p = classify(tape, model.head(), d);
    if (model.user_head()) out.p_user = classify(tape, *model.user_head(), out.d_user);
    if (model.product_head()) out.p_product = classify(tape, *model.product_head(), out.d_product);
    return out;
}

CombinedLoss combined_loss(Tape& tape, const ForwardOutput& out, std::size_t gold, const LossWeights& weights)
{
    CombinedLoss loss;
    loss.terms[0] = ad::cross_entropy(tape, out.p, gold);
    if (!out.p_user.valid() || !out.p_product.valid()) {
        loss.total = loss.terms[0];
        return loss;
    }
    loss.terms[1] = ad::cross_entropy(tape, out.p_user, gold);
    loss.terms[2] = ad::cross_entropy(tape, out.p_product, gold);

    const std::array<double, 3> lambda = {weights.main, weights.user, weights.product};
    for (std::size_t k = 0; k < 3; ++k) {
        if (lambda[k] == 0.0) continue;
        const Value term = ad::scale(tape, loss.terms[k], lambda[k]);
        loss.total = loss.total.valid() ? ad::elem_add(tape, loss.total, term) : term;
    }
    if (!loss.total.valid()) loss.total = ad::scale(tape, loss.terms[0], 0.0);
    return loss;
}

std::size_t argmax(std::span<const double> values)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

std::size_t predict(const ForwardOutput& out)
{
    return argmax(out.p.data());
}

}  // namespace huapa
