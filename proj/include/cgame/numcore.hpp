#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace cgame::numcore {

/// Dense row-major matrix of doubles. Rows are batch samples wherever a batch is involved.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    void fill(double v);
    Matrix transposed() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// Throws NumericError if any entry is NaN or infinite.
void require_finite(std::span<const double> values, std::string_view what);
void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, std::string_view what);

/// out = x * W^T + bias, x: [b x k], W: [n x k], bias: n (may be empty).
Matrix affine(const Matrix& x, const Matrix& w, std::span<const double> bias);

double leaky_relu(double z, double slope) noexcept;
/// Derivative convention: 1 for z > 0, slope for z <= 0.
double leaky_relu_grad(double z, double slope) noexcept;

/// Two-layer perceptron y = LeakyReLU(W2 LeakyReLU(W1 x + b1) + b2).
struct Mlp2Params {
    Matrix w1;              // n_h x n_in
    std::vector<double> b1; // n_h
    Matrix w2;              // n_out x n_h
    std::vector<double> b2; // n_out
    double slope = 0.01;

    std::size_t n_in() const noexcept { return w1.cols(); }
    std::size_t n_hidden() const noexcept { return w1.rows(); }
    std::size_t n_out() const noexcept { return w2.rows(); }

    /// Zero parameters of the given shape.
    static Mlp2Params zeros(std::size_t n_in, std::size_t n_hidden, std::size_t n_out, double slope = 0.01);

    void validate() const;

    /// Visits (w1, b1, w2, b2) as flat spans in that fixed order.
    void for_each_block(const std::function<void(std::span<double>)>& fn);
    void for_each_block(const std::function<void(std::span<const double>)>& fn) const;
    std::size_t parameter_count() const noexcept;

    friend bool operator==(const Mlp2Params&, const Mlp2Params&) = default;
};

struct Mlp2Cache {
    Matrix x;
    Matrix z1; // hidden pre-activation
    Matrix a1; // hidden activation
    Matrix z2; // output pre-activation
};

struct Mlp2Forward {
    Matrix y;
    Mlp2Cache cache;
};

struct Mlp2Backward {
    Mlp2Params grads; // same shapes as the parameters; slope copied
    Matrix input_grad;
};

Mlp2Forward mlp2_forward(const Mlp2Params& params, const Matrix& x);
Mlp2Backward mlp2_backward(const Mlp2Params& params, const Mlp2Cache& cache, const Matrix& upstream);

inline constexpr double kCosineEps = 1e-12;

/// Per-feature cosine similarity along the batch axis: result[f] = cos(hx[:, f], hy[:, f]).
std::vector<double> batch_cosine(const Matrix& hx, const Matrix& hy, double eps = kCosineEps);

/// Per-structure similarity between hy and hx gated by each column of `structures`,
/// taken over the feature axis and averaged over the batch.
///
/// `literal` evaluates the un-squared radicals sqrt(sum(hx*M)) * sqrt(sum(hy)); a
/// non-positive radicand yields 0 in that mode.
std::vector<double> structure_cosine(const Matrix& hx, const Matrix& hy, const Matrix& structures,
                                     double eps = kCosineEps, bool literal = false);

/// Momentum SGD on one flat block: v <- momentum*v + g; p <- p - lr*v.
void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              double lr, double momentum);

/// Momentum SGD state for a set of Mlp2Params. Velocity buffers are owned here.
class SgdMomentum {
public:
    SgdMomentum(double lr, double momentum);

    /// Applies one step to `params` (blocks in for_each_block order).
    void step(std::span<Mlp2Params* const> params, std::span<const Mlp2Params* const> grads);

    double lr() const noexcept { return lr_; }
    double momentum() const noexcept { return momentum_; }

private:
    double lr_;
    double momentum_;
    std::vector<std::vector<double>> velocity_;
};

/// Central finite-difference gradient of `fn` at `point`.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& fn,
                                     std::span<const double> point, double step = 1e-5);

} // namespace cgame::numcore
