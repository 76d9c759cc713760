#pragma once

// Minimal reverse-mode differentiation over dense double-precision matrices.
//
// Every tensor is rank 2 (rows x cols); vectors are 1 x n rows and scalars
// are 1 x 1. Intermediate nodes live on a Tape for the duration of one
// forward/backward pass. Model parameters are leaves owned by a
// ParameterSet and persist across passes.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace huapa::ad {

struct Shape {
    std::size_t rows = 1;
    std::size_t cols = 1;

    constexpr std::size_t size() const noexcept { return rows * cols; }
    constexpr bool operator==(const Shape&) const = default;

    static constexpr Shape vec(std::size_t n) noexcept { return {1, n}; }
    static constexpr Shape scalar() noexcept { return {1, 1}; }
};

std::string to_string(const Shape& shape);

class Tape;

struct Node {
    Shape shape;
    std::vector<double> data;
    // Same length as data whenever requires_grad is set, empty otherwise.
    std::vector<double> grad;
    bool requires_grad = false;

    // Producing operation; nullptr for leaves and constants.
    const char* op = nullptr;
    std::vector<Node*> inputs;
    void (*backward)(Node&) = nullptr;

    // Op-specific payload (ids, slice bounds, supported positions, ...).
    std::vector<std::size_t> indices;
    double scalar = 0.0;

    const Tape* owner = nullptr;
    std::size_t position = 0;
    const char* label = nullptr;
};

// Non-owning handle to a node.
class Value {
public:
    Value() = default;
    explicit Value(Node* node) noexcept : m_node(node) { }

    bool valid() const noexcept { return m_node != nullptr; }
    Node* node() const noexcept { return m_node; }

    const Shape& shape() const { return m_node->shape; }
    std::size_t rows() const { return m_node->shape.rows; }
    std::size_t cols() const { return m_node->shape.cols; }
    std::size_t size() const { return m_node->shape.size(); }
    bool requires_grad() const { return m_node->requires_grad; }
    const char* op() const { return m_node->op; }

    std::span<const double> data() const { return m_node->data; }
    std::span<double> mutable_data() { return m_node->data; }
    std::span<const double> grad() const { return m_node->grad; }

    double at(std::size_t r, std::size_t c) const { return m_node->data[r * cols() + c]; }
    double item() const;

private:
    Node* m_node = nullptr;
};

class Parameter {
public:
    Parameter(std::string name, Shape shape, bool trainable);
    Parameter(const Parameter&) = delete;
    Parameter& operator=(const Parameter&) = delete;

    const std::string& name() const noexcept { return m_name; }
    const Shape& shape() const noexcept { return m_node.shape; }
    std::size_t size() const noexcept { return m_node.shape.size(); }
    bool trainable() const noexcept { return m_node.requires_grad; }

    // Forward passes only read through the handle; gradients reach the
    // leaf through Tape::backward.
    Value value() const noexcept { return Value(const_cast<Node*>(&m_node)); }

    std::span<double> data() noexcept { return m_node.data; }
    std::span<const double> data() const noexcept { return m_node.data; }
    std::span<double> grad() noexcept { return m_node.grad; }
    std::span<const double> grad() const noexcept { return m_node.grad; }

    void zero_grad();

private:
    std::string m_name;
    Node m_node;
};

// Registry of every leaf the model owns, in creation order.
class ParameterSet {
public:
    Parameter& add(std::string name, Shape shape, bool trainable = true);

    Parameter* find(std::string_view name);
    const Parameter* find(std::string_view name) const;

    std::size_t size() const noexcept { return m_params.size(); }
    std::size_t scalar_count() const;

    auto begin() { return m_params.begin(); }
    auto end() { return m_params.end(); }
    auto begin() const { return m_params.begin(); }
    auto end() const { return m_params.end(); }

    std::vector<Parameter*> trainable();
    void zero_grad();

private:
    std::deque<Parameter> m_params;
};

class Tape {
public:
    // With gradients disabled, recorded nodes carry no grad buffers or
    // backward functions (forward-only evaluation).
    explicit Tape(bool grad_enabled = true) : m_grad_enabled(grad_enabled) { }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool grad_enabled() const noexcept { return m_grad_enabled; }

    Value constant(Shape shape, std::vector<double> data);
    Value zeros(Shape shape);
    Value leaf(Shape shape, std::vector<double> data, bool requires_grad = true);

    Value record(const char* op, Shape shape, std::vector<double> data,
                 std::initializer_list<Value> inputs, void (*backward)(Node&));
    Value record(const char* op, Shape shape, std::vector<double> data,
                 std::span<const Value> inputs, void (*backward)(Node&));

    // Propagates d(root)/d(node) into every requires-grad node reachable
    // from root. Intermediate grads are reset first; leaf grads accumulate
    // across calls until cleared.
    void backward(Value root);

    // Resets grads of the tape-owned leaves.
    void zero_grad();
    void clear();

    std::size_t size() const noexcept { return m_nodes.size(); }
    const std::deque<Node>& nodes() const noexcept { return m_nodes; }

private:
    Node& push(Shape shape, std::vector<double> data);

    std::deque<Node> m_nodes;
    bool m_grad_enabled;
};

// Primitive operations. Each validates shapes and throws Error(shape)
// naming the op and the offending shapes.

// A[m x k] * B[k x n]
Value matmul(Tape& tape, Value a, Value b);
// A[m x k] * B[n x k]^T, i.e. applies the row-major weight matrix B to
// every row of A.
Value matmul_nt(Tape& tape, Value a, Value b);
// X[m x n] + b broadcast over rows, b holding n entries.
Value add_bias(Tape& tape, Value x, Value b);
Value elem_add(Tape& tape, Value x, Value y);
Value elem_mul(Tape& tape, Value x, Value y);
Value scale(Tape& tape, Value x, double factor);
Value tanh(Tape& tape, Value x);
Value sigmoid(Tape& tape, Value x);
Value concat_cols(Tape& tape, Value x, Value y);
Value slice_cols(Tape& tape, Value x, std::size_t begin, std::size_t end);
// Vertical concatenation of same-width blocks.
Value stack_rows(Tape& tape, std::span<const Value> rows);
Value gather_rows(Tape& tape, Value table, std::span<const std::size_t> ids);
// H[L x d], w holding L entries -> [1 x d]
Value weighted_sum(Tape& tape, Value h, Value w);
Value sum(Tape& tape, Value x);

Value masked_softmax(Tape& tape, Value scores, const std::vector<bool>& mask);
Value softmax(Tape& tape, Value scores);

// -log p[gold]. When p comes straight from (masked_)softmax the value and
// gradient are computed from the logits with log-sum-exp.
Value cross_entropy(Tape& tape, Value p, std::size_t gold);

void clear_grads(std::span<Value> leaves);

// Compares analytic gradients of build() against central differences
// (f(x+h) - f(x-h)) / 2h. Checks min(max_coords, total) coordinates
// sampled across all leaves (max_coords == 0 checks every coordinate).
// Returns max |a - n| / max(1e-8, |a| + |n|).
double grad_check(const std::function<Value(Tape&)>& build, std::span<Value> leaves,
                  double step = 1e-5, std::size_t max_coords = 32, std::uint64_t seed = 1);

}  // namespace huapa::ad
