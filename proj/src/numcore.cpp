#include "cgame/numcore.hpp"

#include "cgame/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cgame::numcore {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows * cols) {
        throw ShapeError("matrix value count " + std::to_string(values_.size()) + " does not match " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

void require_finite(std::span<const double> values, std::string_view what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw NumericError(std::string(what) + ": non-finite value " + std::to_string(values[i]) +
                               " at flat index " + std::to_string(i));
        }
    }
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, std::string_view what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

Matrix affine(const Matrix& x, const Matrix& w, std::span<const double> bias) {
    if (x.cols() != w.cols()) {
        throw ShapeError("affine: input width " + std::to_string(x.cols()) + " vs weight width " +
                         std::to_string(w.cols()));
    }
    if (!bias.empty() && bias.size() != w.rows()) throw ShapeError("affine: bias length mismatch");

    const std::size_t n = w.rows();
    const std::size_t k = w.cols();
    const Matrix wt = w.transposed();
    Matrix out(x.rows(), n);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double* o = out.row(i).data();
        if (!bias.empty()) std::copy(bias.begin(), bias.end(), o);
        const double* xi = x.row(i).data();
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double a = xi[kk];
            const double* wr = wt.row(kk).data();
            for (std::size_t j = 0; j < n; ++j) o[j] += a * wr[j];
        }
    }
    return out;
}

double leaky_relu(double z, double slope) noexcept { return z > 0.0 ? z : slope * z; }

double leaky_relu_grad(double z, double slope) noexcept { return z > 0.0 ? 1.0 : slope; }

Mlp2Params Mlp2Params::zeros(std::size_t n_in, std::size_t n_hidden, std::size_t n_out, double slope) {
    Mlp2Params p;
    p.w1 = Matrix(n_hidden, n_in);
    p.b1.assign(n_hidden, 0.0);
    p.w2 = Matrix(n_out, n_hidden);
    p.b2.assign(n_out, 0.0);
    p.slope = slope;
    return p;
}

void Mlp2Params::validate() const {
    if (b1.size() != w1.rows() || w2.cols() != w1.rows() || b2.size() != w2.rows()) {
        throw ShapeError("Mlp2Params: inconsistent block shapes");
    }
    if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("LeakyReLU slope must lie in (0, 1)", "slope");
}

void Mlp2Params::for_each_block(const std::function<void(std::span<double>)>& fn) {
    fn(w1.values());
    fn(b1);
    fn(w2.values());
    fn(b2);
}

void Mlp2Params::for_each_block(const std::function<void(std::span<const double>)>& fn) const {
    fn(w1.values());
    fn(b1);
    fn(w2.values());
    fn(b2);
}

std::size_t Mlp2Params::parameter_count() const noexcept {
    return w1.size() + b1.size() + w2.size() + b2.size();
}

namespace {

Matrix activate(const Matrix& z, double slope) {
    Matrix a = z;
    for (double& v : a.values()) v = leaky_relu(v, slope);
    return a;
}

// upstream (.) f'(z), in place on a copy of upstream
Matrix through_activation(const Matrix& upstream, const Matrix& z, double slope) {
    Matrix d = upstream;
    auto dv = d.values();
    auto zv = z.values();
    for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= leaky_relu_grad(zv[i], slope);
    return d;
}

// grad_w += d^T x ; grad_b += column sums of d
void accumulate_weight_grads(const Matrix& d, const Matrix& x, Matrix& grad_w, std::vector<double>& grad_b) {
    const std::size_t k = x.cols();
    for (std::size_t i = 0; i < d.rows(); ++i) {
        const double* di = d.row(i).data();
        const double* xi = x.row(i).data();
        for (std::size_t n = 0; n < d.cols(); ++n) {
            const double a = di[n];
            grad_b[n] += a;
            double* gw = grad_w.row(n).data();
            for (std::size_t kk = 0; kk < k; ++kk) gw[kk] += a * xi[kk];
        }
    }
}

// d * W : [b x n] * [n x k]
Matrix backprop_input(const Matrix& d, const Matrix& w) {
    Matrix out(d.rows(), w.cols());
    for (std::size_t i = 0; i < d.rows(); ++i) {
        double* o = out.row(i).data();
        const double* di = d.row(i).data();
        for (std::size_t n = 0; n < d.cols(); ++n) {
            const double a = di[n];
            const double* wr = w.row(n).data();
            for (std::size_t kk = 0; kk < w.cols(); ++kk) o[kk] += a * wr[kk];
        }
    }
    return out;
}

} // namespace

Mlp2Forward mlp2_forward(const Mlp2Params& params, const Matrix& x) {
    if (x.cols() != params.n_in()) {
        throw ShapeError("mlp2_forward: input width " + std::to_string(x.cols()) + ", expected " +
                         std::to_string(params.n_in()));
    }
    Mlp2Forward out;
    out.cache.x = x;
    out.cache.z1 = affine(x, params.w1, params.b1);
    out.cache.a1 = activate(out.cache.z1, params.slope);
    out.cache.z2 = affine(out.cache.a1, params.w2, params.b2);
    out.y = activate(out.cache.z2, params.slope);
    return out;
}

Mlp2Backward mlp2_backward(const Mlp2Params& params, const Mlp2Cache& cache, const Matrix& upstream) {
    require_shape(upstream, cache.z2.rows(), cache.z2.cols(), "mlp2_backward upstream");
    if (cache.x.cols() != params.n_in() || cache.z2.cols() != params.n_out()) {
        throw ShapeError("mlp2_backward: cache does not match parameters");
    }
    Mlp2Backward out;
    out.grads = Mlp2Params::zeros(params.n_in(), params.n_hidden(), params.n_out(), params.slope);

    const Matrix d2 = through_activation(upstream, cache.z2, params.slope);
    accumulate_weight_grads(d2, cache.a1, out.grads.w2, out.grads.b2);
    const Matrix da1 = backprop_input(d2, params.w2);
    const Matrix d1 = through_activation(da1, cache.z1, params.slope);
    accumulate_weight_grads(d1, cache.x, out.grads.w1, out.grads.b1);
    out.input_grad = backprop_input(d1, params.w1);
    return out;
}

std::vector<double> batch_cosine(const Matrix& hx, const Matrix& hy, double eps) {
    require_shape(hy, hx.rows(), hx.cols(), "batch_cosine");
    if (hx.rows() == 0) throw ShapeError("batch_cosine: empty batch");
    const std::size_t nf = hx.cols();
    std::vector<double> dot(nf, 0.0), nx(nf, 0.0), ny(nf, 0.0);
    for (std::size_t b = 0; b < hx.rows(); ++b) {
        const double* x = hx.row(b).data();
        const double* y = hy.row(b).data();
        for (std::size_t f = 0; f < nf; ++f) {
            dot[f] += x[f] * y[f];
            nx[f] += x[f] * x[f];
            ny[f] += y[f] * y[f];
        }
    }
    std::vector<double> out(nf, 0.0);
    for (std::size_t f = 0; f < nf; ++f) {
        const double den_x = std::sqrt(nx[f]);
        const double den_y = std::sqrt(ny[f]);
        if (den_x < eps || den_y < eps) continue;
        out[f] = std::clamp(dot[f] / (den_x * den_y), -1.0, 1.0);
    }
    return out;
}

std::vector<double> structure_cosine(const Matrix& hx, const Matrix& hy, const Matrix& structures, double eps,
                                     bool literal) {
    require_shape(hy, hx.rows(), hx.cols(), "structure_cosine");
    if (structures.rows() != hx.cols()) throw ShapeError("structure_cosine: structure matrix row count != n_f");
    if (hx.rows() == 0) throw ShapeError("structure_cosine: empty batch");

    const std::size_t nf = hx.cols();
    const std::size_t ns = structures.cols();
    const Matrix mt = structures.transposed(); // n_s x n_f, contiguous per structure
    std::vector<double> out(ns, 0.0);
    for (std::size_t b = 0; b < hx.rows(); ++b) {
        const double* x = hx.row(b).data();
        const double* y = hy.row(b).data();
        double yy = 0.0;
        double ysum = 0.0;
        for (std::size_t f = 0; f < nf; ++f) {
            yy += y[f] * y[f];
            ysum += y[f];
        }
        for (std::size_t s = 0; s < ns; ++s) {
            const double* m = mt.row(s).data();
            double num = 0.0;
            double gated_sq = 0.0;
            double gated_sum = 0.0;
            for (std::size_t f = 0; f < nf; ++f) {
                const double g = x[f] * m[f];
                num += g * y[f];
                gated_sq += g * g;
                gated_sum += g;
            }
            double value = 0.0;
            if (literal) {
                if (gated_sum > eps && ysum > eps) value = num / (std::sqrt(gated_sum) * std::sqrt(ysum));
            } else {
                const double den_x = std::sqrt(gated_sq);
                const double den_y = std::sqrt(yy);
                if (den_x >= eps && den_y >= eps) value = std::clamp(num / (den_x * den_y), -1.0, 1.0);
            }
            out[s] += value;
        }
    }
    const double inv_b = 1.0 / static_cast<double>(hx.rows());
    for (double& v : out) v *= inv_b;
    return out;
}

void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity, double lr,
              double momentum) {
    if (params.size() != grads.size() || params.size() != velocity.size()) {
        throw ShapeError("sgd_step: parameter/gradient/velocity length mismatch");
    }
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive", "train.lr");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)", "train.momentum");
    require_finite(grads, "sgd_step gradient");
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = momentum * velocity[i] + grads[i];
        params[i] -= lr * velocity[i];
    }
}

SgdMomentum::SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive", "train.lr");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)", "train.momentum");
}

void SgdMomentum::step(std::span<Mlp2Params* const> params, std::span<const Mlp2Params* const> grads) {
    if (params.size() != grads.size()) throw ShapeError("SgdMomentum: parameter/gradient set size mismatch");

    std::vector<std::span<double>> p_blocks;
    std::vector<std::span<const double>> g_blocks;
    for (Mlp2Params* p : params) p->for_each_block([&](std::span<double> s) { p_blocks.push_back(s); });
    for (const Mlp2Params* g : grads) g->for_each_block([&](std::span<const double> s) { g_blocks.push_back(s); });
    if (p_blocks.size() != g_blocks.size()) throw ShapeError("SgdMomentum: block count mismatch");

    if (velocity_.empty()) {
        for (const auto& b : p_blocks) velocity_.emplace_back(b.size(), 0.0);
    }
    if (velocity_.size() != p_blocks.size()) throw ShapeError("SgdMomentum: parameter set changed between steps");

    // Check every block before touching any parameter so a bad gradient leaves the model intact.
    for (std::size_t i = 0; i < g_blocks.size(); ++i) require_finite(g_blocks[i], "gradient block " + std::to_string(i));
    for (std::size_t i = 0; i < p_blocks.size(); ++i) sgd_step(p_blocks[i], g_blocks[i], velocity_[i], lr_, momentum_);
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& fn,
                                     std::span<const double> point, double step) {
    if (!(step > 0.0)) throw ConfigError("finite difference step must be positive");
    std::vector<double> x(point.begin(), point.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + step;
        const double fp = fn(x);
        x[i] = orig - step;
        const double fm = fn(x);
        x[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_grad: non-finite evaluation at coordinate " + std::to_string(i));
        }
        grad[i] = (fp - fm) / (2.0 * step);
    }
    return grad;
}

} // namespace cgame::numcore
