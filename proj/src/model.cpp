#include "cgame/model.hpp"

#include "cgame/error.hpp"
#include "cgame/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

namespace cgame::model {

namespace fs = std::filesystem;
using nlohmann::json;
using numcore::mlp2_backward;
using numcore::mlp2_forward;

std::string to_string(GateAggregation v) { return v == GateAggregation::Mean ? "mean" : "sum"; }
std::string to_string(LossKind v) { return v == LossKind::MSE ? "mse" : "l1"; }
std::string to_string(NormalizationPolicy v) {
    switch (v) {
    case NormalizationPolicy::ZScore: return "zscore";
    case NormalizationPolicy::Rms: return "rms";
    case NormalizationPolicy::None: return "none";
    }
    return "zscore";
}

GateAggregation gate_aggregation_from_string(const std::string& s) {
    if (s == "mean") return GateAggregation::Mean;
    if (s == "sum") return GateAggregation::Sum;
    throw ConfigError("unknown gate aggregation '" + s + "' (expected mean|sum)");
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "mse" || s == "MSE") return LossKind::MSE;
    if (s == "l1" || s == "L1") return LossKind::L1;
    throw ConfigError("unknown loss kind '" + s + "' (expected mse|l1)");
}

NormalizationPolicy normalization_from_string(const std::string& s) {
    if (s == "zscore") return NormalizationPolicy::ZScore;
    if (s == "rms") return NormalizationPolicy::Rms;
    if (s == "none") return NormalizationPolicy::None;
    throw ConfigError("unknown normalization policy '" + s + "' (expected zscore|rms|none)");
}

void MatcherHyper::validate() const {
    if (n_s < 1) throw ConfigError("must be >= 1", "model.n_s");
    if (p < 1) throw ConfigError("must be >= 1", "model.p");
    if (p >= n_s) throw ConfigError("must be smaller than model.n_s", "model.p");
    if (q < 1) throw ConfigError("must be >= 1", "model.q");
    if (!(lambda >= 0.0 && lambda < 1.0)) throw ConfigError("must lie in [0, 1)", "model.lambda");
    if (update_interval < 1) throw ConfigError("must be >= 1", "model.update_interval");
}

GraphMatcherState GraphMatcherState::initial(std::size_t n_f, const MatcherHyper& hyper) {
    hyper.validate();
    return {Matrix(n_f, hyper.n_s, 1.0), Matrix(1, hyper.n_s, 1.0), hyper};
}

void ModelDims::validate() const {
    if (n_l < 1 || n_t < 1 || n_p < 2) throw ConfigError("model dimensions must be positive");
    if (n_f < 1) throw ConfigError("must be >= 1", "model.n_f");
    if (n_h < 1) throw ConfigError("must be >= 1", "model.n_h");
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("must be positive", "train.lr");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("must lie in [0, 1)", "train.momentum");
    if (batch_size < 2) throw ConfigError("must be >= 2", "train.batch_size");
    if (max_iters < 1) throw ConfigError("must be >= 1", "train.max_iters");
    if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("must lie in (0, 1)", "train.slope");
    if (eval_interval < 1) throw ConfigError("must be >= 1", "train.eval_interval");
    matcher.validate();
}

namespace {

constexpr double kMinScale = 1e-8;

// Streaming per-dimension first/second moments.
struct MomentAccumulator {
    explicit MomentAccumulator(std::size_t n) : sum(n, 0.0), sumsq(n, 0.0) {}
    void add(std::span<const double> row) {
        if (row.size() != sum.size()) throw ShapeError("standardizer: row width mismatch");
        for (std::size_t i = 0; i < row.size(); ++i) {
            sum[i] += row[i];
            sumsq[i] += row[i] * row[i];
        }
        ++count;
    }
    Standardizer finish(NormalizationPolicy policy) const {
        const std::size_t n = sum.size();
        Standardizer s = Standardizer::identity(n);
        if (policy == NormalizationPolicy::None || count == 0) return s;
        const double inv = 1.0 / static_cast<double>(count);
        for (std::size_t i = 0; i < n; ++i) {
            const double mean = sum[i] * inv;
            const double second = sumsq[i] * inv;
            if (policy == NormalizationPolicy::ZScore) {
                const double sd = std::sqrt(std::max(0.0, second - mean * mean));
                s.offset[i] = mean;
                s.scale[i] = sd < kMinScale ? 1.0 : sd;
            } else {
                const double rms = std::sqrt(second);
                s.scale[i] = rms < kMinScale ? 1.0 : rms;
            }
        }
        return s;
    }
    std::vector<double> sum;
    std::vector<double> sumsq;
    std::size_t count = 0;
};

} // namespace

Standardizer Standardizer::fit(std::span<const std::vector<double>> rows, NormalizationPolicy policy) {
    if (rows.empty()) throw DataError("standardizer: no rows to fit");
    MomentAccumulator acc(rows.front().size());
    for (const auto& r : rows) acc.add(r);
    return acc.finish(policy);
}

Standardizer Standardizer::identity(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)}; }

void Standardizer::apply(std::span<double> values) const {
    if (values.size() != offset.size()) throw ShapeError("standardizer: width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = (values[i] - offset[i]) / scale[i];
}

void Standardizer::invert(std::span<double> values) const {
    if (values.size() != offset.size()) throw ShapeError("standardizer: width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = values[i] * scale[i] + offset[i];
}

namespace {

Mlp2Params he_uniform(std::size_t n_in, std::size_t n_h, std::size_t n_out, double slope, Rng& rng) {
    Mlp2Params p = Mlp2Params::zeros(n_in, n_h, n_out, slope);
    auto fill = [&](Matrix& w) {
        const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * static_cast<double>(w.cols())));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : w.values()) v = dist(rng);
    };
    fill(p.w1);
    fill(p.w2);
    return p;
}

} // namespace

CGameModel CGameModel::initialize(const ModelDims& dims, const TrainConfig& config) {
    dims.validate();
    config.validate();
    Rng rng(derive_seed(config.seed, streams::kInit));
    CGameModel m;
    m.dims = dims;
    m.config = config;
    m.fwd_enc = he_uniform(dims.n_in(), dims.n_h, dims.n_f, config.slope, rng);
    m.fwd_dec = he_uniform(dims.n_f, dims.n_h, dims.n_out(), config.slope, rng);
    m.inv_enc = he_uniform(dims.n_out(), dims.n_h, dims.n_f, config.slope, rng);
    m.inv_dec = he_uniform(dims.n_f, dims.n_h, dims.n_in(), config.slope, rng);
    m.matcher = GraphMatcherState::initial(dims.n_f, config.matcher);
    m.counts_norm = Standardizer::identity(dims.n_in());
    m.od_norm = Standardizer::identity(dims.n_out());
    return m;
}

void CGameModel::validate() const {
    dims.validate();
    auto check = [](const Mlp2Params& p, std::size_t in, std::size_t h, std::size_t out, const char* name) {
        p.validate();
        if (p.n_in() != in || p.n_hidden() != h || p.n_out() != out) {
            throw ShapeError(std::string("parameter block ") + name + " does not match model dims");
        }
    };
    check(fwd_enc, dims.n_in(), dims.n_h, dims.n_f, "fwd_enc");
    check(fwd_dec, dims.n_f, dims.n_h, dims.n_out(), "fwd_dec");
    check(inv_enc, dims.n_out(), dims.n_h, dims.n_f, "inv_enc");
    check(inv_dec, dims.n_f, dims.n_h, dims.n_in(), "inv_dec");
    numcore::require_shape(matcher.m, dims.n_f, matcher.hyper.n_s, "matcher M");
    numcore::require_shape(matcher.v, 1, matcher.hyper.n_s, "matcher V");
    if (counts_norm.size() != dims.n_in() || od_norm.size() != dims.n_out()) {
        throw ShapeError("normalisation statistics do not match model dims");
    }
}

void CGameModel::round_to_f32() {
    for (Mlp2Params* p : {&fwd_enc, &fwd_dec, &inv_enc, &inv_dec}) {
        p->for_each_block([](std::span<double> s) { io::round_to_f32(s); });
    }
    io::round_to_f32(matcher.m.values());
    io::round_to_f32(matcher.v.values());
}

std::vector<double> flatten_counts(const TrafficCountsMatrix& counts) {
    const auto v = counts.values.values();
    return {v.begin(), v.end()};
}

std::vector<double> flatten_od(const ODMatrix& od) {
    const auto v = od.values.values();
    return {v.begin(), v.end()};
}

ODMatrix unflatten_od(std::span<const double> values, std::size_t n_p) {
    if (values.size() != n_p * n_p) throw ShapeError("unflatten_od: length mismatch");
    return {Matrix(n_p, n_p, std::vector<double>(values.begin(), values.end()))};
}

TrafficCountsMatrix unflatten_counts(std::span<const double> values, std::size_t n_l, std::size_t n_t, double slice_s) {
    if (values.size() != n_l * n_t) throw ShapeError("unflatten_counts: length mismatch");
    return {Matrix(n_l, n_t, std::vector<double>(values.begin(), values.end())), slice_s};
}

std::vector<double> flatten_input(const CGameModel& model, const TrafficCountsMatrix& counts) {
    numcore::require_shape(counts.values, model.dims.n_l, model.dims.n_t, "traffic counts");
    auto x = flatten_counts(counts);
    model.counts_norm.apply(x);
    return x;
}

Matrix encode(const Mlp2Params& encoder, const Matrix& x) { return mlp2_forward(encoder, x).y; }

Matrix decode(const Mlp2Params& decoder, const Matrix& g) { return mlp2_forward(decoder, g).y; }

std::vector<double> matcher_gate(const GraphMatcherState& matcher) {
    const std::size_t nf = matcher.m.rows();
    const std::size_t ns = matcher.m.cols();
    numcore::require_shape(matcher.v, 1, ns, "matcher V");
    std::vector<double> gate(nf, 0.0);
    for (std::size_t f = 0; f < nf; ++f) {
        double acc = 0.0;
        for (std::size_t s = 0; s < ns; ++s) acc += matcher.m(f, s) * matcher.v(0, s);
        gate[f] = matcher.hyper.aggregation == GateAggregation::Mean ? acc / static_cast<double>(ns) : acc;
    }
    return gate;
}

Matrix apply_gate(const Matrix& h, std::span<const double> gate) {
    if (gate.size() != h.cols()) throw ShapeError("gate width does not match feature width");
    Matrix g = h;
    for (std::size_t b = 0; b < g.rows(); ++b) {
        auto row = g.row(b);
        for (std::size_t f = 0; f < row.size(); ++f) row[f] *= gate[f];
    }
    return g;
}

Matrix apply_matcher(const Matrix& h, const GraphMatcherState& matcher) {
    if (h.cols() != matcher.m.rows()) throw ShapeError("apply_matcher: feature width does not match M");
    return apply_gate(h, matcher_gate(matcher));
}

Matrix matcher_candidates(std::span<const FeaturePair> pairs, Rng* permute) {
    if (pairs.empty()) throw ConfigError("matcher_candidates needs at least one batch pair");
    const std::size_t nf = pairs.front().hx.cols();
    const std::size_t p = pairs.size();
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (permute != nullptr) std::shuffle(order.begin(), order.end(), *permute);

    Matrix out(nf, p);
    for (std::size_t i = 0; i < p; ++i) {
        const auto& pair = pairs[order[i]];
        if (pair.hx.cols() != nf) throw ShapeError("matcher_candidates: feature width differs between pairs");
        const auto col = numcore::batch_cosine(pair.hx, pair.hy);
        for (std::size_t f = 0; f < nf; ++f) out(f, i) = col[f];
    }
    return out;
}

namespace {

void discount_accumulate(Matrix& v, const Matrix& m, const FeaturePair& pair, const MatcherHyper& hyper) {
    const auto cos = numcore::structure_cosine(pair.hx, pair.hy, m, numcore::kCosineEps, hyper.literal_structure_cosine);
    for (std::size_t s = 0; s < cos.size(); ++s) v(0, s) = hyper.lambda * v(0, s) + cos[s];
}

} // namespace

Matrix matcher_value_refresh(const GraphMatcherState& matcher, std::span<const FeaturePair> pairs) {
    if (pairs.empty()) throw ConfigError("matcher_value_refresh needs at least one batch pair");
    Matrix v(1, matcher.m.cols(), 1.0);
    for (const auto& pair : pairs) discount_accumulate(v, matcher.m, pair, matcher.hyper);
    return v;
}

std::vector<std::size_t> top_structures(std::span<const double> values, std::size_t keep) {
    if (keep > values.size()) throw ConfigError("cannot retain more structures than exist");
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    idx.resize(keep);
    return idx;
}

Matrix retain_top_structures(const Matrix& m, std::span<const double> values, std::size_t keep) {
    if (values.size() != m.cols()) throw ShapeError("retain_top_structures: value count != column count");
    const auto idx = top_structures(values, keep);
    Matrix out(m.rows(), keep);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < keep; ++c) out(r, c) = m(r, idx[c]);
    return out;
}

GraphMatcherState matcher_step(const GraphMatcherState& matcher, std::span<const FeaturePair> candidate_pairs,
                               std::span<const FeaturePair> value_pairs, Rng& rng) {
    const MatcherHyper& hyper = matcher.hyper;
    hyper.validate();
    const std::size_t ns = matcher.n_structures();
    if (ns != hyper.n_s) throw ShapeError("matcher_step: M column count differs from n_s");
    if (hyper.p >= ns) throw ConfigError("must be smaller than model.n_s", "model.p");
    if (candidate_pairs.size() != hyper.p) throw ConfigError("matcher_step needs exactly p candidate batches");
    if (value_pairs.size() != hyper.q) throw ConfigError("matcher_step needs exactly q value batches");

    // Discounted value accumulation on the old structures, interleaved with candidate generation.
    Matrix old_values = matcher.v;
    for (const auto& pair : candidate_pairs) discount_accumulate(old_values, matcher.m, pair, hyper);
    const Matrix fresh = matcher_candidates(candidate_pairs, &rng);

    const std::size_t keep = ns - hyper.p;
    const Matrix retained = retain_top_structures(matcher.m, old_values.values(), keep);

    GraphMatcherState next;
    next.hyper = hyper;
    next.m = Matrix(matcher.n_features(), ns);
    for (std::size_t r = 0; r < next.m.rows(); ++r) {
        for (std::size_t c = 0; c < keep; ++c) next.m(r, c) = retained(r, c);
        for (std::size_t c = 0; c < hyper.p; ++c) next.m(r, keep + c) = fresh(r, c);
    }
    next.v = matcher_value_refresh(next, value_pairs);
    return next;
}

double loss_value(LossKind kind, const Matrix& prediction, const Matrix& target) {
    numcore::require_shape(target, prediction.rows(), prediction.cols(), "loss target");
    const auto p = prediction.values();
    const auto t = target.values();
    if (p.empty()) throw ShapeError("loss on empty matrices");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double e = p[i] - t[i];
        acc += kind == LossKind::MSE ? e * e : std::abs(e);
    }
    return acc / static_cast<double>(p.size());
}

Matrix loss_grad(LossKind kind, const Matrix& prediction, const Matrix& target) {
    numcore::require_shape(target, prediction.rows(), prediction.cols(), "loss target");
    Matrix g(prediction.rows(), prediction.cols());
    const auto p = prediction.values();
    const auto t = target.values();
    auto gv = g.values();
    const double inv_n = 1.0 / static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double e = p[i] - t[i];
        gv[i] = kind == LossKind::MSE ? 2.0 * e * inv_n : (e > 0.0 ? inv_n : (e < 0.0 ? -inv_n : 0.0));
    }
    return g;
}

DirectionPass direction_pass(const Mlp2Params& encoder, const Mlp2Params& decoder, std::span<const double> gate,
                             const Matrix& x, const Matrix& target, LossKind kind) {
    auto enc = mlp2_forward(encoder, x);
    const Matrix g = apply_gate(enc.y, gate);
    auto dec = mlp2_forward(decoder, g);

    DirectionPass out;
    out.loss = loss_value(kind, dec.y, target);
    const Matrix dy = loss_grad(kind, dec.y, target);
    auto dec_back = mlp2_backward(decoder, dec.cache, dy);
    const Matrix dh = apply_gate(dec_back.input_grad, gate);
    auto enc_back = mlp2_backward(encoder, enc.cache, dh);

    out.prediction = std::move(dec.y);
    out.features = std::move(enc.y);
    out.enc_grad = std::move(enc_back.grads);
    out.dec_grad = std::move(dec_back.grads);
    out.input_grad = std::move(enc_back.input_grad);
    return out;
}

ModelDims dims_for(const simkit::Dataset& dataset, std::size_t n_f, std::size_t n_h) {
    return {dataset.n_links(), dataset.n_slices(), dataset.n_spots(), n_f, n_h};
}

namespace {

// Epoch-shuffled index stream over one split.
class BatchSampler {
public:
    BatchSampler(std::vector<std::size_t> pool, std::uint64_t seed) : pool_(std::move(pool)), rng_(seed) { reshuffle(); }

    std::vector<std::size_t> next(std::size_t b) {
        std::vector<std::size_t> out;
        out.reserve(b);
        while (out.size() < b) {
            if (pos_ == order_.size()) reshuffle();
            out.push_back(order_[pos_++]);
        }
        return out;
    }

private:
    void reshuffle() {
        order_ = pool_;
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
    }

    std::vector<std::size_t> pool_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
    Rng rng_;
};

struct Batch {
    Matrix counts; // standardized, b x n_in
    Matrix od;     // standardized, b x n_out
};

Batch assemble(const CGameModel& model, const simkit::Dataset& ds, std::span<const std::size_t> idx) {
    Batch b{Matrix(idx.size(), model.dims.n_in()), Matrix(idx.size(), model.dims.n_out())};
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& item = ds.items[idx[r]];
        auto cr = b.counts.row(r);
        auto orow = b.od.row(r);
        const auto cv = item.counts.values.values();
        const auto ov = item.od.values.values();
        std::copy(cv.begin(), cv.end(), cr.begin());
        std::copy(ov.begin(), ov.end(), orow.begin());
        model.counts_norm.apply(cr);
        model.od_norm.apply(orow);
    }
    return b;
}

FeaturePair encode_pair(const CGameModel& model, const Batch& batch) {
    return {encode(model.fwd_enc, batch.counts), encode(model.inv_enc, batch.od)};
}

double validation_loss(const CGameModel& model, const simkit::Dataset& ds) {
    const auto& val = ds.split.validation;
    const auto gate = matcher_gate(model.matcher);
    constexpr std::size_t kChunk = 256;
    double weighted = 0.0;
    for (std::size_t start = 0; start < val.size(); start += kChunk) {
        const std::size_t end = std::min(val.size(), start + kChunk);
        const std::span<const std::size_t> idx(val.data() + start, end - start);
        const Batch b = assemble(model, ds, idx);
        const Matrix od_hat = decode(model.fwd_dec, apply_gate(encode(model.fwd_enc, b.counts), gate));
        const Matrix counts_hat = decode(model.inv_dec, apply_gate(encode(model.inv_enc, b.od), gate));
        const double l = loss_value(model.config.loss, od_hat, b.od) + loss_value(model.config.loss, counts_hat, b.counts);
        weighted += l * static_cast<double>(idx.size());
    }
    return weighted / static_cast<double>(val.size());
}

void check_dataset(const simkit::Dataset& ds, const ModelDims& dims) {
    if (ds.split.train.empty()) throw ConfigError("training split is empty", "sim.train_fraction");
    if (ds.n_links() != dims.n_l || ds.n_slices() != dims.n_t || ds.n_spots() != dims.n_p) {
        throw ShapeError("dataset shapes (n_l=" + std::to_string(ds.n_links()) + ", n_t=" + std::to_string(ds.n_slices()) +
                         ", n_p=" + std::to_string(ds.n_spots()) + ") do not match the model dims");
    }
    for (auto idx : ds.split.train)
        if (idx >= ds.items.size()) throw IndexError("train split index out of range");
    for (auto idx : ds.split.validation)
        if (idx >= ds.items.size()) throw IndexError("validation split index out of range");
}

TrainResult run_training(const simkit::Dataset& ds, const TrainConfig& config, const ModelDims& dims, bool ablation) {
    config.validate();
    dims.validate();
    check_dataset(ds, dims);

    CGameModel model = CGameModel::initialize(dims, config);
    {
        MomentAccumulator counts_acc(dims.n_in());
        MomentAccumulator od_acc(dims.n_out());
        for (auto idx : ds.split.train) {
            counts_acc.add(ds.items[idx].counts.values.values());
            od_acc.add(ds.items[idx].od.values.values());
        }
        model.counts_norm = counts_acc.finish(config.normalization);
        model.od_norm = od_acc.finish(config.normalization);
    }

    BatchSampler batches(ds.split.train, derive_seed(config.seed, streams::kBatch));
    BatchSampler matcher_batches(ds.split.train, derive_seed(config.seed, streams::kMatcher));
    Rng permute_rng(derive_seed(config.seed, streams::kMatcher, 1));
    numcore::SgdMomentum optimizer(config.lr, config.momentum);

    TrainResult result;
    result.curve.train.reserve(config.max_iters);
    CGameModel best = model;
    double best_loss = std::numeric_limits<double>::infinity();
    const bool has_validation = !ds.split.validation.empty();

    std::vector<double> gate = matcher_gate(model.matcher);
    for (std::size_t it = 0; it < config.max_iters; ++it) {
        const auto idx = batches.next(config.batch_size);
        const Batch batch = assemble(model, ds, idx);

        auto fwd = direction_pass(model.fwd_enc, model.fwd_dec, gate, batch.counts, batch.od, config.loss);
        auto inv = direction_pass(model.inv_enc, model.inv_dec, gate, batch.od, batch.counts, config.loss);
        const double loss = fwd.loss + inv.loss;
        if (!std::isfinite(loss)) {
            std::ostringstream msg;
            msg << "non-finite training loss at iteration " << it << " (forward " << fwd.loss << ", inverse "
                << inv.loss << "); try a smaller train.lr";
            throw NumericError(msg.str());
        }
        Mlp2Params* params[] = {&model.fwd_enc, &model.fwd_dec, &model.inv_enc, &model.inv_dec};
        const Mlp2Params* grads[] = {&fwd.enc_grad, &fwd.dec_grad, &inv.enc_grad, &inv.dec_grad};
        optimizer.step(params, grads);
        result.curve.train.push_back(loss);

        if (!ablation && (it + 1) % config.matcher.update_interval == 0) {
            std::vector<FeaturePair> candidates;
            std::vector<FeaturePair> values;
            for (std::size_t i = 0; i < config.matcher.p; ++i) {
                candidates.push_back(encode_pair(model, assemble(model, ds, matcher_batches.next(config.batch_size))));
            }
            for (std::size_t i = 0; i < config.matcher.q; ++i) {
                values.push_back(encode_pair(model, assemble(model, ds, matcher_batches.next(config.batch_size))));
            }
            model.matcher = matcher_step(model.matcher, candidates, values, permute_rng);
            gate = matcher_gate(model.matcher);
            ++result.curve.matcher_steps;
        }

        if (has_validation && ((it + 1) % config.eval_interval == 0 || it + 1 == config.max_iters)) {
            const double v = validation_loss(model, ds);
            if (!std::isfinite(v)) throw NumericError("non-finite validation loss at iteration " + std::to_string(it));
            result.curve.validation.emplace_back(it + 1, v);
            if (v < best_loss) {
                best_loss = v;
                best = model;
                result.curve.best_iteration = it + 1;
            }
        }
    }
    if (!has_validation) {
        best = model;
        result.curve.best_iteration = config.max_iters;
    }
    best.round_to_f32();
    result.model = std::move(best);
    return result;
}

} // namespace

TrainResult train(const simkit::Dataset& dataset, const TrainConfig& config, const ModelDims& dims) {
    return run_training(dataset, config, dims, false);
}

TrainResult train_ablation(const simkit::Dataset& dataset, const TrainConfig& config, const ModelDims& dims) {
    return run_training(dataset, config, dims, true);
}

ODMatrix predict_od(const CGameModel& model, const TrafficCountsMatrix& counts) {
    const auto x = flatten_input(model, counts);
    Matrix in(1, x.size(), x);
    Matrix y = decode(model.fwd_dec, apply_matcher(encode(model.fwd_enc, in), model.matcher));
    auto v = y.values();
    model.od_norm.invert(v);
    for (double& e : v) e = std::max(e, 0.0);
    return unflatten_od(v, model.dims.n_p);
}

TrafficCountsMatrix predict_counts(const CGameModel& model, const ODMatrix& od) {
    numcore::require_shape(od.values, model.dims.n_p, model.dims.n_p, "OD matrix");
    auto x = flatten_od(od);
    model.od_norm.apply(x);
    Matrix in(1, x.size(), x);
    Matrix y = decode(model.inv_dec, apply_matcher(encode(model.inv_enc, in), model.matcher));
    auto v = y.values();
    model.counts_norm.invert(v);
    for (double& e : v) e = std::max(e, 0.0);
    return unflatten_counts(v, model.dims.n_l, model.dims.n_t);
}

void to_json(json& j, const MatcherHyper& h) {
    j = json{{"n_s", h.n_s},
             {"p", h.p},
             {"q", h.q},
             {"lambda", h.lambda},
             {"update_interval", h.update_interval},
             {"literal_structure_cosine", h.literal_structure_cosine},
             {"gate_aggregation", to_string(h.aggregation)}};
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"lr", c.lr},
             {"momentum", c.momentum},
             {"batch_size", c.batch_size},
             {"max_iters", c.max_iters},
             {"loss_kind", to_string(c.loss)},
             {"normalization", to_string(c.normalization)},
             {"slope", c.slope},
             {"eval_interval", c.eval_interval},
             {"seed", c.seed},
             {"matcher", c.matcher}};
}

MatcherHyper matcher_hyper_from_json(const json& j, const std::string& prefix) {
    io::StrictObject o(j, prefix);
    o.allow_only({"n_s", "p", "q", "lambda", "update_interval", "literal_structure_cosine", "gate_aggregation"});
    MatcherHyper h;
    o.read("n_s", h.n_s);
    o.read("p", h.p);
    o.read("q", h.q);
    o.read("lambda", h.lambda);
    o.read("update_interval", h.update_interval);
    o.read("literal_structure_cosine", h.literal_structure_cosine);
    if (o.has("gate_aggregation")) {
        std::string s;
        o.read("gate_aggregation", s);
        try {
            h.aggregation = gate_aggregation_from_string(s);
        } catch (const ConfigError& e) {
            throw ConfigError(e.what(), o.field("gate_aggregation"));
        }
    }
    return h;
}

TrainConfig train_config_from_json(const json& j, const std::string& prefix) {
    io::StrictObject o(j, prefix);
    o.allow_only({"lr", "momentum", "batch_size", "max_iters", "loss_kind", "normalization", "slope", "eval_interval",
                  "seed", "matcher"});
    TrainConfig c;
    o.read("lr", c.lr);
    o.read("momentum", c.momentum);
    o.read("batch_size", c.batch_size);
    o.read("max_iters", c.max_iters);
    o.read("slope", c.slope);
    o.read("eval_interval", c.eval_interval);
    o.read("seed", c.seed);
    std::string s;
    if (o.has("loss_kind")) {
        o.read("loss_kind", s);
        try {
            c.loss = loss_kind_from_string(s);
        } catch (const ConfigError& e) {
            throw ConfigError(e.what(), o.field("loss_kind"));
        }
    }
    if (o.has("normalization")) {
        o.read("normalization", s);
        try {
            c.normalization = normalization_from_string(s);
        } catch (const ConfigError& e) {
            throw ConfigError(e.what(), o.field("normalization"));
        }
    }
    if (o.has("matcher")) c.matcher = matcher_hyper_from_json(o.at("matcher"), o.field("matcher"));
    return c;
}

namespace {

struct BlockRef {
    std::string name;
    std::size_t rows;
    std::size_t cols;
};

// Fixed blob order: four perceptrons (w1, b1, w2, b2 each), then M, then V.
std::vector<BlockRef> block_layout(const CGameModel& m) {
    std::vector<BlockRef> out;
    auto add = [&](const std::string& prefix, const Mlp2Params& p) {
        out.push_back({prefix + ".w1", p.w1.rows(), p.w1.cols()});
        out.push_back({prefix + ".b1", 1, p.b1.size()});
        out.push_back({prefix + ".w2", p.w2.rows(), p.w2.cols()});
        out.push_back({prefix + ".b2", 1, p.b2.size()});
    };
    add("fwd_enc", m.fwd_enc);
    add("fwd_dec", m.fwd_dec);
    add("inv_enc", m.inv_enc);
    add("inv_dec", m.inv_dec);
    out.push_back({"matcher.M", m.matcher.m.rows(), m.matcher.m.cols()});
    out.push_back({"matcher.V", m.matcher.v.rows(), m.matcher.v.cols()});
    return out;
}

std::vector<std::span<double>> block_spans(CGameModel& m) {
    std::vector<std::span<double>> out;
    for (Mlp2Params* p : {&m.fwd_enc, &m.fwd_dec, &m.inv_enc, &m.inv_dec}) {
        p->for_each_block([&](std::span<double> s) { out.push_back(s); });
    }
    out.push_back(m.matcher.m.values());
    out.push_back(m.matcher.v.values());
    return out;
}

json standardizer_json(const Standardizer& s) { return json{{"offset", s.offset}, {"scale", s.scale}}; }

Standardizer standardizer_from_json(const json& j) {
    return {j.at("offset").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
}

} // namespace

void save_model(const CGameModel& model, const fs::path& dir) {
    model.validate();
    CGameModel copy = model;
    std::vector<std::uint8_t> blob;
    for (auto s : block_spans(copy)) io::append_f32le(blob, s);

    json blocks = json::array();
    for (const auto& b : block_layout(model)) blocks.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});

    const json manifest{{"format", "cgame-model"},
                        {"version", kModelFormatVersion},
                        {"dims",
                         {{"n_l", model.dims.n_l},
                          {"n_t", model.dims.n_t},
                          {"n_p", model.dims.n_p},
                          {"n_f", model.dims.n_f},
                          {"n_h", model.dims.n_h}}},
                        {"slope", model.fwd_enc.slope},
                        {"train", model.config},
                        {"matcher", model.matcher.hyper},
                        {"normalization",
                         {{"policy", to_string(model.config.normalization)},
                          {"counts", standardizer_json(model.counts_norm)},
                          {"od", standardizer_json(model.od_norm)}}},
                        {"blob",
                         {{"file", "model.bin"},
                          {"bytes", blob.size()},
                          {"sha256", io::sha256_hex(blob)},
                          {"dtype", "float32-le"},
                          {"blocks", blocks}}}};

    io::write_directory_atomically(dir, [&](const fs::path& tmp) {
        io::write_text(tmp / "model.json", manifest.dump(2) + "\n");
        io::write_file(tmp / "model.bin", blob);
    });
}

CGameModel load_model(const fs::path& dir) {
    const json manifest = io::read_json(dir / "model.json");
    try {
        if (!manifest.is_object() || manifest.value("format", "") != "cgame-model") {
            throw FormatError("not a model manifest: " + (dir / "model.json").string());
        }
        const int version = manifest.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw VersionError("unsupported model format version " + std::to_string(version));
        }
        const auto& d = manifest.at("dims");
        ModelDims dims{d.at("n_l").get<std::size_t>(), d.at("n_t").get<std::size_t>(), d.at("n_p").get<std::size_t>(),
                       d.at("n_f").get<std::size_t>(), d.at("n_h").get<std::size_t>()};
        TrainConfig config = train_config_from_json(manifest.at("train"), "train");
        config.matcher = matcher_hyper_from_json(manifest.at("matcher"), "matcher");
        config.slope = manifest.at("slope").get<double>();

        CGameModel model = CGameModel::initialize(dims, config);
        model.counts_norm = standardizer_from_json(manifest.at("normalization").at("counts"));
        model.od_norm = standardizer_from_json(manifest.at("normalization").at("od"));

        const auto& blob_meta = manifest.at("blob");
        const auto blob = io::read_file(dir / blob_meta.at("file").get<std::string>());
        const auto layout = block_layout(model);
        const auto& blocks = blob_meta.at("blocks");
        if (!blocks.is_array() || blocks.size() != layout.size()) throw FormatError("model blob block list mismatch");
        std::size_t expected = 0;
        for (std::size_t i = 0; i < layout.size(); ++i) {
            if (blocks[i].at("name").get<std::string>() != layout[i].name ||
                blocks[i].at("rows").get<std::size_t>() != layout[i].rows ||
                blocks[i].at("cols").get<std::size_t>() != layout[i].cols) {
                throw ShapeError("model block " + layout[i].name + " does not match the manifest dims");
            }
            expected += layout[i].rows * layout[i].cols * 4;
        }
        if (blob.size() != expected || blob.size() != blob_meta.at("bytes").get<std::size_t>()) {
            throw ShapeError("model.bin holds " + std::to_string(blob.size()) + " bytes, dims require " +
                             std::to_string(expected));
        }
        if (io::sha256_hex(blob) != blob_meta.at("sha256").get<std::string>()) {
            throw ChecksumError("model.bin SHA-256 does not match the manifest");
        }
        std::size_t offset = 0;
        for (auto s : block_spans(model)) {
            const auto values = io::read_f32le(blob, offset, s.size());
            std::copy(values.begin(), values.end(), s.begin());
        }
        model.validate();
        return model;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed model manifest: ") + e.what());
    }
}

} // namespace cgame::model
