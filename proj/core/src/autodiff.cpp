#include "huapa/autodiff.hpp"

#include "huapa/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace huapa::ad {

namespace {

constexpr const char* kMaskedSoftmax = "masked_softmax";

[[noreturn]] void shape_error(std::string_view op, const Shape& a, const Shape& b)
{
    std::ostringstream os;
    os << op << ": shape mismatch " << to_string(a) << " vs " << to_string(b);
    fail(ErrorKind::shape, os.str());
}

[[noreturn]] void shape_error(std::string_view op, const std::string& what)
{
    fail(ErrorKind::shape, std::string(op) + ": " + what);
}

// ---- backward functions -------------------------------------------------

void matmul_backward(Node& out)
{
    Node& a = *out.inputs[0];
    Node& b = *out.inputs[1];
    const std::size_t m = a.shape.rows, k = a.shape.cols, n = b.shape.cols;
    const auto& g = out.grad;
    if (a.requires_grad) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double gij = g[i * n + j];
                if (gij == 0.0) continue;
                for (std::size_t p = 0; p < k; ++p) a.grad[i * k + p] += gij * b.data[p * n + j];
            }
    }
    if (b.requires_grad) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = a.data[i * k + p];
                for (std::size_t j = 0; j < n; ++j) b.grad[p * n + j] += aip * g[i * n + j];
            }
    }
}

void matmul_nt_backward(Node& out)
{
    Node& a = *out.inputs[0];
    Node& b = *out.inputs[1];
    const std::size_t m = a.shape.rows, k = a.shape.cols, n = b.shape.rows;
    const auto& g = out.grad;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double gij = g[i * n + j];
            if (gij == 0.0) continue;
            if (a.requires_grad) {
                double* ga = a.grad.data() + i * k;
                const double* bj = b.data.data() + j * k;
                for (std::size_t p = 0; p < k; ++p) ga[p] += gij * bj[p];
            }
            if (b.requires_grad) {
                double* gb = b.grad.data() + j * k;
                const double* ai = a.data.data() + i * k;
                for (std::size_t p = 0; p < k; ++p) gb[p] += gij * ai[p];
            }
        }
    }
}

void add_bias_backward(Node& out)
{
    Node& x = *out.inputs[0];
    Node& b = *out.inputs[1];
    const std::size_t n = out.shape.cols;
    for (std::size_t i = 0; i < out.grad.size(); ++i) {
        if (x.requires_grad) x.grad[i] += out.grad[i];
        if (b.requires_grad) b.grad[i % n] += out.grad[i];
    }
}

void elem_add_backward(Node& out)
{
    for (Node* in : out.inputs) {
        if (!in->requires_grad) continue;
        for (std::size_t i = 0; i < out.grad.size(); ++i) in->grad[i] += out.grad[i];
    }
}

void elem_mul_backward(Node& out)
{
    Node& x = *out.inputs[0];
    Node& y = *out.inputs[1];
    for (std::size_t i = 0; i < out.grad.size(); ++i) {
        if (x.requires_grad) x.grad[i] += out.grad[i] * y.data[i];
        if (y.requires_grad) y.grad[i] += out.grad[i] * x.data[i];
    }
}

void scale_backward(Node& out)
{
    Node& x = *out.inputs[0];
    for (std::size_t i = 0; i < out.grad.size(); ++i) x.grad[i] += out.grad[i] * out.scalar;
}

void tanh_backward(Node& out)
{
    Node& x = *out.inputs[0];
    for (std::size_t i = 0; i < out.grad.size(); ++i) {
        const double y = out.data[i];
        x.grad[i] += out.grad[i] * (1.0 - y * y);
    }
}

void sigmoid_backward(Node& out)
{
    Node& x = *out.inputs[0];
    for (std::size_t i = 0; i < out.grad.size(); ++i) {
        const double y = out.data[i];
        x.grad[i] += out.grad[i] * y * (1.0 - y);
    }
}

void concat_cols_backward(Node& out)
{
    Node& x = *out.inputs[0];
    Node& y = *out.inputs[1];
    const std::size_t a = x.shape.cols, b = y.shape.cols, w = a + b;
    for (std::size_t r = 0; r < out.shape.rows; ++r) {
        if (x.requires_grad)
            for (std::size_t c = 0; c < a; ++c) x.grad[r * a + c] += out.grad[r * w + c];
        if (y.requires_grad)
            for (std::size_t c = 0; c < b; ++c) y.grad[r * b + c] += out.grad[r * w + a + c];
    }
}

void slice_cols_backward(Node& out)
{
    Node& x = *out.inputs[0];
    const std::size_t begin = out.indices[0];
    const std::size_t w = out.shape.cols, xw = x.shape.cols;
    for (std::size_t r = 0; r < out.shape.rows; ++r)
        for (std::size_t c = 0; c < w; ++c) x.grad[r * xw + begin + c] += out.grad[r * w + c];
}

void stack_rows_backward(Node& out)
{
    std::size_t offset = 0;
    for (Node* in : out.inputs) {
        const std::size_t n = in->data.size();
        if (in->requires_grad)
            for (std::size_t i = 0; i < n; ++i) in->grad[i] += out.grad[offset + i];
        offset += n;
    }
}

void gather_rows_backward(Node& out)
{
    Node& table = *out.inputs[0];
    const std::size_t d = out.shape.cols;
    for (std::size_t r = 0; r < out.indices.size(); ++r) {
        double* dst = table.grad.data() + out.indices[r] * d;
        const double* src = out.grad.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
}

void weighted_sum_backward(Node& out)
{
    Node& h = *out.inputs[0];
    Node& w = *out.inputs[1];
    const std::size_t len = h.shape.rows, d = h.shape.cols;
    for (std::size_t j = 0; j < len; ++j) {
        const double* hj = h.data.data() + j * d;
        if (h.requires_grad) {
            double* ghj = h.grad.data() + j * d;
            const double wj = w.data[j];
            for (std::size_t c = 0; c < d; ++c) ghj[c] += wj * out.grad[c];
        }
        if (w.requires_grad) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) acc += hj[c] * out.grad[c];
            w.grad[j] += acc;
        }
    }
}

void sum_backward(Node& out)
{
    Node& x = *out.inputs[0];
    for (double& g : x.grad) g += out.grad[0];
}

void masked_softmax_backward(Node& out)
{
    Node& z = *out.inputs[0];
    double dot = 0.0;
    for (std::size_t j : out.indices) dot += out.data[j] * out.grad[j];
    for (std::size_t j : out.indices) z.grad[j] += out.data[j] * (out.grad[j] - dot);
}

// Gradient written straight into the softmax logits: p - onehot(gold).
void softmax_cross_entropy_backward(Node& out)
{
    Node& p = *out.inputs[0];
    Node& z = *p.inputs[0];
    const std::size_t gold = out.indices[0];
    const double g = out.grad[0];
    for (std::size_t j : p.indices) z.grad[j] += g * (p.data[j] - (j == gold ? 1.0 : 0.0));
}

void cross_entropy_backward(Node& out)
{
    Node& p = *out.inputs[0];
    const std::size_t gold = out.indices[0];
    p.grad[gold] += -out.grad[0] / p.data[gold];
}

void require_valid(std::string_view op, Value v)
{
    if (!v.valid()) shape_error(op, "null input");
}

}  // namespace

std::string to_string(const Shape& shape)
{
    std::ostringstream os;
    os << '[' << shape.rows << 'x' << shape.cols << ']';
    return os.str();
}

double Value::item() const
{
    if (size() != 1) fail(ErrorKind::shape, "item: value is not scalar " + to_string(shape()));
    return m_node->data[0];
}

// ---- Parameter / ParameterSet ----------------------------------------------

Parameter::Parameter(std::string name, Shape shape, bool trainable)
  : m_name(std::move(name))
{
    m_node.shape = shape;
    m_node.data.assign(shape.size(), 0.0);
    m_node.requires_grad = trainable;
    if (trainable) m_node.grad.assign(shape.size(), 0.0);
    m_node.label = m_name.c_str();
}

void Parameter::zero_grad()
{
    std::fill(m_node.grad.begin(), m_node.grad.end(), 0.0);
}

Parameter& ParameterSet::add(std::string name, Shape shape, bool trainable)
{
    if (find(name) != nullptr) fail(ErrorKind::shape, "duplicate parameter name " + name);
    return m_params.emplace_back(std::move(name), shape, trainable);
}

Parameter* ParameterSet::find(std::string_view name)
{
    for (auto& p : m_params)
        if (p.name() == name) return &p;
    return nullptr;
}

const Parameter* ParameterSet::find(std::string_view name) const
{
    for (const auto& p : m_params)
        if (p.name() == name) return &p;
    return nullptr;
}

std::size_t ParameterSet::scalar_count() const
{
    std::size_t n = 0;
    for (const auto& p : m_params) n += p.size();
    return n;
}

std::vector<Parameter*> ParameterSet::trainable()
{
    std::vector<Parameter*> out;
    for (auto& p : m_params)
        if (p.trainable()) out.push_back(&p);
    return out;
}

void ParameterSet::zero_grad()
{
    for (auto& p : m_params) p.zero_grad();
}

// ---- Tape ------------------------------------------------------------------

Node& Tape::push(Shape shape, std::vector<double> data)
{
    Node& node = m_nodes.emplace_back();
    node.shape = shape;
    node.data = std::move(data);
    node.owner = this;
    node.position = m_nodes.size() - 1;
    return node;
}

Value Tape::constant(Shape shape, std::vector<double> data)
{
    if (data.size() != shape.size()) shape_error("constant", "data length does not match " + to_string(shape));
    return Value(&push(shape, std::move(data)));
}

Value Tape::zeros(Shape shape)
{
    return constant(shape, std::vector<double>(shape.size(), 0.0));
}

Value Tape::leaf(Shape shape, std::vector<double> data, bool requires_grad)
{
    if (data.size() != shape.size()) shape_error("leaf", "data length does not match " + to_string(shape));
    Node& node = push(shape, std::move(data));
    node.requires_grad = requires_grad;
    if (requires_grad) node.grad.assign(shape.size(), 0.0);
    return Value(&node);
}

Value Tape::record(const char* op, Shape shape, std::vector<double> data,
                   std::initializer_list<Value> inputs, void (*backward)(Node&))
{
    return record(op, shape, std::move(data), std::span<const Value>(inputs.begin(), inputs.size()), backward);
}

Value Tape::record(const char* op, Shape shape, std::vector<double> data,
                   std::span<const Value> inputs, void (*backward)(Node&))
{
    Node& node = push(shape, std::move(data));
    node.op = op;
    node.inputs.reserve(inputs.size());
    bool needs_grad = false;
    for (const Value& v : inputs) {
        node.inputs.push_back(v.node());
        needs_grad = needs_grad || v.requires_grad();
    }
    if (m_grad_enabled && needs_grad) {
        node.requires_grad = true;
        node.grad.assign(shape.size(), 0.0);
        node.backward = backward;
    }
    return Value(&node);
}

void Tape::backward(Value root)
{
    require_valid("backward", root);
    if (root.size() != 1) fail(ErrorKind::shape, "backward: root must be scalar, got " + to_string(root.shape()));
    Node& r = *root.node();
    if (r.owner != this) fail(ErrorKind::shape, "backward: root was not recorded on this tape");
    if (!r.requires_grad) return;

    for (std::size_t i = 0; i <= r.position; ++i) {
        Node& n = m_nodes[i];
        if (n.op != nullptr && n.requires_grad) std::fill(n.grad.begin(), n.grad.end(), 0.0);
    }
    r.grad[0] += 1.0;
    for (std::size_t i = r.position + 1; i-- > 0;) {
        Node& n = m_nodes[i];
        if (n.requires_grad && n.backward != nullptr) n.backward(n);
    }
}

void Tape::zero_grad()
{
    for (Node& n : m_nodes)
        if (n.op == nullptr) std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

void Tape::clear()
{
    m_nodes.clear();
}

void clear_grads(std::span<Value> leaves)
{
    for (Value& v : leaves) std::fill(v.node()->grad.begin(), v.node()->grad.end(), 0.0);
}

// ---- forward ops -----------------------------------------------------------

Value matmul(Tape& tape, Value a, Value b)
{
    require_valid("matmul", a);
    require_valid("matmul", b);
    if (a.cols() != b.rows()) shape_error("matmul", a.shape(), b.shape());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n, 0.0);
    const auto ad = a.data();
    const auto bd = b.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ad[i * k + p];
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bd[p * n + j];
        }
    return tape.record("matmul", {m, n}, std::move(out), {a, b}, matmul_backward);
}

Value matmul_nt(Tape& tape, Value a, Value b)
{
    require_valid("matmul_nt", a);
    require_valid("matmul_nt", b);
    if (a.cols() != b.cols()) shape_error("matmul_nt", a.shape(), b.shape());
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    std::vector<double> out(m * n);
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ad[i * k + p] * bd[j * k + p];
            out[i * n + j] = acc;
        }
    return tape.record("matmul_nt", {m, n}, std::move(out), {a, b}, matmul_nt_backward);
}

Value add_bias(Tape& tape, Value x, Value b)
{
    require_valid("add_bias", x);
    require_valid("add_bias", b);
    if (b.size() != x.cols()) shape_error("add_bias", x.shape(), b.shape());
    const std::size_t n = x.cols();
    std::vector<double> out(x.data().begin(), x.data().end());
    const auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i % n];
    return tape.record("add_bias", x.shape(), std::move(out), {x, b}, add_bias_backward);
}

Value elem_add(Tape& tape, Value x, Value y)
{
    require_valid("elem_add", x);
    require_valid("elem_add", y);
    if (x.shape() != y.shape()) shape_error("elem_add", x.shape(), y.shape());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + y.data()[i];
    return tape.record("elem_add", x.shape(), std::move(out), {x, y}, elem_add_backward);
}

Value elem_mul(Tape& tape, Value x, Value y)
{
    require_valid("elem_mul", x);
    require_valid("elem_mul", y);
    if (x.shape() != y.shape()) shape_error("elem_mul", x.shape(), y.shape());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * y.data()[i];
    return tape.record("elem_mul", x.shape(), std::move(out), {x, y}, elem_mul_backward);
}

Value scale(Tape& tape, Value x, double factor)
{
    require_valid("scale", x);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor;
    Value v = tape.record("scale", x.shape(), std::move(out), {x}, scale_backward);
    v.node()->scalar = factor;
    return v;
}

Value tanh(Tape& tape, Value x)
{
    require_valid("tanh", x);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.data()[i]);
    return tape.record("tanh", x.shape(), std::move(out), {x}, tanh_backward);
}

Value sigmoid(Tape& tape, Value x)
{
    require_valid("sigmoid", x);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double z = x.data()[i];
        // Split on sign so exp never overflows.
        if (z >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-z));
        } else {
            const double e = std::exp(z);
            out[i] = e / (1.0 + e);
        }
    }
    return tape.record("sigmoid", x.shape(), std::move(out), {x}, sigmoid_backward);
}

Value concat_cols(Tape& tape, Value x, Value y)
{
    require_valid("concat_cols", x);
    require_valid("concat_cols", y);
    if (x.rows() != y.rows()) shape_error("concat_cols", x.shape(), y.shape());
    const std::size_t a = x.cols(), b = y.cols(), w = a + b;
    std::vector<double> out(x.rows() * w);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::copy_n(x.data().data() + r * a, a, out.data() + r * w);
        std::copy_n(y.data().data() + r * b, b, out.data() + r * w + a);
    }
    return tape.record("concat_cols", {x.rows(), w}, std::move(out), {x, y}, concat_cols_backward);
}

Value slice_cols(Tape& tape, Value x, std::size_t begin, std::size_t end)
{
    require_valid("slice_cols", x);
    if (begin >= end || end > x.cols()) {
        shape_error("slice_cols", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                      ") outside " + to_string(x.shape()));
    }
    const std::size_t w = end - begin;
    std::vector<double> out(x.rows() * w);
    for (std::size_t r = 0; r < x.rows(); ++r)
        std::copy_n(x.data().data() + r * x.cols() + begin, w, out.data() + r * w);
    Value v = tape.record("slice_cols", {x.rows(), w}, std::move(out), {x}, slice_cols_backward);
    v.node()->indices = {begin, end};
    return v;
}

Value stack_rows(Tape& tape, std::span<const Value> rows)
{
    if (rows.empty()) shape_error("stack_rows", "no inputs");
    const std::size_t w = rows.front().cols();
    std::size_t total = 0;
    for (const Value& r : rows) {
        require_valid("stack_rows", r);
        if (r.cols() != w) shape_error("stack_rows", rows.front().shape(), r.shape());
        total += r.rows();
    }
    std::vector<double> out;
    out.reserve(total * w);
    for (const Value& r : rows) out.insert(out.end(), r.data().begin(), r.data().end());
    return tape.record("stack_rows", {total, w}, std::move(out), rows, stack_rows_backward);
}

Value gather_rows(Tape& tape, Value table, std::span<const std::size_t> ids)
{
    require_valid("gather_rows", table);
    if (ids.empty()) shape_error("gather_rows", "empty id list");
    const std::size_t d = table.cols();
    std::vector<double> out(ids.size() * d);
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] >= table.rows()) {
            fail(ErrorKind::shape, "gather_rows: id " + std::to_string(ids[r]) + " out of range for table " +
                                       to_string(table.shape()));
        }
        std::copy_n(table.data().data() + ids[r] * d, d, out.data() + r * d);
    }
    Value v = tape.record("gather_rows", {ids.size(), d}, std::move(out), {table}, gather_rows_backward);
    v.node()->indices.assign(ids.begin(), ids.end());
    return v;
}

Value weighted_sum(Tape& tape, Value h, Value w)
{
    require_valid("weighted_sum", h);
    require_valid("weighted_sum", w);
    if (w.size() != h.rows()) shape_error("weighted_sum", h.shape(), w.shape());
    const std::size_t len = h.rows(), d = h.cols();
    std::vector<double> out(d, 0.0);
    for (std::size_t j = 0; j < len; ++j) {
        const double wj = w.data()[j];
        const double* hj = h.data().data() + j * d;
        for (std::size_t c = 0; c < d; ++c) out[c] += wj * hj[c];
    }
    return tape.record("weighted_sum", Shape::vec(d), std::move(out), {h, w}, weighted_sum_backward);
}

Value sum(Tape& tape, Value x)
{
    require_valid("sum", x);
    const double total = std::accumulate(x.data().begin(), x.data().end(), 0.0);
    return tape.record("sum", Shape::scalar(), {total}, {x}, sum_backward);
}

Value masked_softmax(Tape& tape, Value scores, const std::vector<bool>& mask)
{
    require_valid("masked_softmax", scores);
    if (mask.size() != scores.size()) {
        shape_error("masked_softmax", "mask length " + std::to_string(mask.size()) + " vs scores " +
                                          to_string(scores.shape()));
    }
    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < mask.size(); ++j)
        if (mask[j]) support.push_back(j);
    if (support.empty()) fail(ErrorKind::shape, "masked_softmax: empty attention support");

    const auto z = scores.data();
    double top = z[support.front()];
    for (std::size_t j : support) top = std::max(top, z[j]);
    std::vector<double> out(scores.size(), 0.0);
    double total = 0.0;
    for (std::size_t j : support) {
        out[j] = std::exp(z[j] - top);
        total += out[j];
    }
    for (std::size_t j : support) out[j] /= total;
    Value v = tape.record(kMaskedSoftmax, scores.shape(), std::move(out), {scores}, masked_softmax_backward);
    v.node()->indices = std::move(support);
    return v;
}

Value softmax(Tape& tape, Value scores)
{
    require_valid("softmax", scores);
    return masked_softmax(tape, scores, std::vector<bool>(scores.size(), true));
}

Value cross_entropy(Tape& tape, Value p, std::size_t gold)
{
    require_valid("cross_entropy", p);
    if (gold >= p.size()) {
        fail(ErrorKind::shape, "cross_entropy: gold class " + std::to_string(gold) + " out of range for " +
                                   to_string(p.shape()));
    }
    const Node& pn = *p.node();
    if (pn.op == kMaskedSoftmax) {
        const auto& z = pn.inputs[0]->data;
        double top = z[pn.indices.front()];
        for (std::size_t j : pn.indices) top = std::max(top, z[j]);
        double total = 0.0;
        bool gold_supported = false;
        for (std::size_t j : pn.indices) {
            total += std::exp(z[j] - top);
            gold_supported = gold_supported || j == gold;
        }
        const double loss = gold_supported ? top + std::log(total) - z[gold]
                                           : std::numeric_limits<double>::infinity();
        Value v = tape.record("cross_entropy", Shape::scalar(), {loss}, {p}, softmax_cross_entropy_backward);
        v.node()->indices = {gold};
        return v;
    }
    const double loss = -std::log(p.data()[gold]);
    Value v = tape.record("cross_entropy", Shape::scalar(), {loss}, {p}, cross_entropy_backward);
    v.node()->indices = {gold};
    return v;
}

// ---- gradient check --------------------------------------------------------

double grad_check(const std::function<Value(Tape&)>& build, std::span<Value> leaves, double step,
                  std::size_t max_coords, std::uint64_t seed)
{
    Tape tape;
    Value root = build(tape);
    if (root.size() != 1) fail(ErrorKind::shape, "grad_check: build must return a scalar");
    clear_grads(leaves);
    tape.backward(root);

    auto describe = [&](std::size_t leaf, std::size_t coord) {
        std::string s = "leaf " + std::to_string(leaf);
        if (const char* label = leaves[leaf].node()->label) s += " (" + std::string(label) + ")";
        return s + " coordinate " + std::to_string(coord);
    };

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        if (!leaves[l].requires_grad()) continue;
        for (std::size_t c = 0; c < leaves[l].size(); ++c) coords.emplace_back(l, c);
    }
    if (max_coords != 0 && coords.size() > max_coords) {
        std::vector<std::pair<std::size_t, std::size_t>> picked;
        std::mt19937_64 rng(seed);
        std::sample(coords.begin(), coords.end(), std::back_inserter(picked), max_coords, rng);
        coords = std::move(picked);
    }

    auto evaluate = [&]() {
        Tape probe(false);
        return build(probe).item();
    };

    double worst = 0.0;
    for (auto [l, c] : coords) {
        Node& leaf = *leaves[l].node();
        const double analytic = leaf.grad[c];
        const double original = leaf.data[c];
        leaf.data[c] = original + step;
        const double up = evaluate();
        leaf.data[c] = original - step;
        const double down = evaluate();
        leaf.data[c] = original;
        if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(analytic))
            fail(ErrorKind::numeric, "grad_check: non-finite value at " + describe(l, c));
        const double numeric = (up - down) / (2.0 * step);
        const double err = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace huapa::ad
