#include "reference_forward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace oracle {

Mat param(const huapa::HuapaModel& model, const std::string& name)
{
    const huapa::ad::Parameter* p = model.params().find(name);
    if (p == nullptr) throw std::runtime_error("oracle: no parameter " + name);
    Mat m;
    m.rows = p->shape().rows;
    m.cols = p->shape().cols;
    m.v.assign(p->data().begin(), p->data().end());
    return m;
}

double sigmoid(double x)
{
    return 1.0 / (1.0 + std::exp(-x));
}

Lstm lstm_params(const huapa::HuapaModel& model, const std::string& prefix)
{
    return {param(model, prefix + ".gates_weight"), param(model, prefix + ".gates_bias"),
            param(model, prefix + ".cell_weight"), param(model, prefix + ".cell_bias")};
}

std::pair<Vec, Vec> lstm_step(const Lstm& p, const Vec& x, const Vec& h_prev, const Vec& c_prev)
{
    const std::size_t H = h_prev.size();
    Vec hx = h_prev;
    hx.insert(hx.end(), x.begin(), x.end());

    Vec h(H), c(H);
    for (std::size_t k = 0; k < H; ++k) {
        double zi = p.b.v[k], zf = p.b.v[H + k], zo = p.b.v[2 * H + k], zc = p.bc.v[k];
        for (std::size_t j = 0; j < hx.size(); ++j) {
            zi += p.w(k, j) * hx[j];
            zf += p.w(H + k, j) * hx[j];
            zo += p.w(2 * H + k, j) * hx[j];
            zc += p.wc(k, j) * hx[j];
        }
        const double i = sigmoid(zi), f = sigmoid(zf), o = sigmoid(zo);
        c[k] = f * c_prev[k] + i * std::tanh(zc);
        h[k] = o * std::tanh(c[k]);
    }
    return {h, c};
}

std::vector<Vec> bilstm(const Lstm& fwd, const Lstm& bwd, const std::vector<Vec>& xs)
{
    const std::size_t n = xs.size();
    const std::size_t H = fwd.bc.v.size();
    std::vector<Vec> f(n), b(n);
    Vec h(H, 0.0), c(H, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        std::tie(h, c) = lstm_step(fwd, xs[t], h, c);
        f[t] = h;
    }
    h.assign(H, 0.0);
    c.assign(H, 0.0);
    for (std::size_t t = n; t-- > 0;) {
        std::tie(h, c) = lstm_step(bwd, xs[t], h, c);
        b[t] = h;
    }
    std::vector<Vec> out(n);
    for (std::size_t t = 0; t < n; ++t) {
        out[t] = f[t];
        out[t].insert(out[t].end(), b[t].begin(), b[t].end());
    }
    return out;
}

Attention attention_params(const huapa::HuapaModel& model, const std::string& prefix)
{
    return {param(model, prefix + ".score"), param(model, prefix + ".hidden_weight"),
            param(model, prefix + ".context_weight"), param(model, prefix + ".bias")};
}

Vec attend(const Attention& a, const std::vector<Vec>& hs, const Vec& ctx, Vec& pooled)
{
    const std::size_t A = a.v.v.size();
    Vec e(hs.size());
    for (std::size_t t = 0; t < hs.size(); ++t) {
        double score = 0.0;
        for (std::size_t r = 0; r < A; ++r) {
            double z = a.b.v[r];
            for (std::size_t j = 0; j < hs[t].size(); ++j) z += a.wh(r, j) * hs[t][j];
            for (std::size_t j = 0; j < ctx.size(); ++j) z += a.wu(r, j) * ctx[j];
            score += a.v.v[r] * std::tanh(z);
        }
        e[t] = score;
    }
    double top = e[0];
    for (double x : e) top = std::max(top, x);
    double total = 0.0;
    Vec alpha(e.size());
    for (std::size_t t = 0; t < e.size(); ++t) total += alpha[t] = std::exp(e[t] - top);
    for (double& x : alpha) x /= total;

    pooled.assign(hs[0].size(), 0.0);
    for (std::size_t t = 0; t < hs.size(); ++t)
        for (std::size_t j = 0; j < pooled.size(); ++j) pooled[j] += alpha[t] * hs[t][j];
    return alpha;
}

namespace {

Vec row(const Mat& m, std::size_t r)
{
    return Vec(m.v.begin() + static_cast<std::ptrdiff_t>(r * m.cols),
               m.v.begin() + static_cast<std::ptrdiff_t>((r + 1) * m.cols));
}

View encode_view(const huapa::HuapaModel& model, const std::string& branch, const huapa::EncodedDoc& doc,
                 const Vec& ctx)
{
    const Mat emb = param(model, "word_embedding");
    const Lstm wf = lstm_params(model, branch + ".word_lstm.fwd");
    const Lstm wb = lstm_params(model, branch + ".word_lstm.bwd");
    const Lstm sf = lstm_params(model, branch + ".sentence_lstm.fwd");
    const Lstm sb = lstm_params(model, branch + ".sentence_lstm.bwd");
    const Attention wa = attention_params(model, branch + ".word_attention");
    const Attention sa = attention_params(model, branch + ".sentence_attention");

    View view;
    std::vector<Vec> sentence_vectors;
    for (const auto& sentence : doc.sentences) {
        std::vector<Vec> xs;
        for (huapa::TokenId id : sentence) xs.push_back(row(emb, static_cast<std::size_t>(id)));
        Vec s;
        view.word_weights.push_back(attend(wa, bilstm(wf, wb, xs), ctx, s));
        sentence_vectors.push_back(s);
    }
    view.sentence_weights = attend(sa, bilstm(sf, sb, sentence_vectors), ctx, view.document);
    return view;
}

Vec classify(const Mat& w, const Mat& b, const Vec& d)
{
    Vec z(w.rows);
    for (std::size_t k = 0; k < w.rows; ++k) {
        z[k] = b.v[k];
        for (std::size_t j = 0; j < d.size(); ++j) z[k] += w(k, j) * d[j];
    }
    double top = z[0];
    for (double x : z) top = std::max(top, x);
    double total = 0.0;
    for (double& x : z) total += x = std::exp(x - top);
    for (double& x : z) x /= total;
    return z;
}

}  // namespace

Output forward(const huapa::HuapaModel& model, const huapa::EncodedDoc& doc)
{
    Output out;
    const Vec u = row(param(model, "user_embedding"), static_cast<std::size_t>(doc.user));
    const Vec p = row(param(model, "product_embedding"), static_cast<std::size_t>(doc.product));
    out.user = encode_view(model, "user", doc, u);
    out.product = encode_view(model, "product", doc, p);

    Vec d = out.user.document;
    d.insert(d.end(), out.product.document.begin(), out.product.document.end());
    out.p = classify(param(model, "head.weight"), param(model, "head.bias"), d);
    out.p_user = classify(param(model, "user_head.weight"), param(model, "user_head.bias"), out.user.document);
    out.p_product =
        classify(param(model, "product_head.weight"), param(model, "product_head.bias"), out.product.document);
    return out;
}

double loss(const Output& out, std::size_t gold, double l1, double l2, double l3)
{
    return -(l1 * std::log(out.p[gold]) + l2 * std::log(out.p_user[gold]) + l3 * std::log(out.p_product[gold]));
}

}  // namespace oracle
