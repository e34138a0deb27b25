#pragma once

#include "cgame/numcore.hpp"
#include "cgame/random.hpp"
#include "cgame/simkit.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cgame::model {

using numcore::Matrix;
using numcore::Mlp2Params;
using simkit::ODMatrix;
using simkit::TrafficCountsMatrix;

/// How the n_s structure axis is collapsed into one per-feature gate.
enum class GateAggregation { Mean, Sum };
enum class LossKind { MSE, L1 };
/// Per-dimension input/target scaling fitted on the training split.
/// ZScore: (x - mean) / sd. Rms: x / rms (keeps counts non-negative). None: identity.
enum class NormalizationPolicy { ZScore, Rms, None };

std::string to_string(GateAggregation v);
std::string to_string(LossKind v);
std::string to_string(NormalizationPolicy v);
GateAggregation gate_aggregation_from_string(const std::string& s);
LossKind loss_kind_from_string(const std::string& s);
NormalizationPolicy normalization_from_string(const std::string& s);

struct MatcherHyper {
    std::size_t n_s = 64;            // structures (columns of M)
    std::size_t p = 8;               // structures replaced per matcher step
    std::size_t q = 4;               // value-refresh sub-steps
    double lambda = 0.9;             // discount factor for V
    std::size_t update_interval = 50; // gradient iterations between matcher steps
    bool literal_structure_cosine = false;
    GateAggregation aggregation = GateAggregation::Mean;

    void validate() const;
    friend bool operator==(const MatcherHyper&, const MatcherHyper&) = default;
};

/// Structure matching matrix M [n_f x n_s] and structure value matrix V [1 x n_s].
struct GraphMatcherState {
    Matrix m;
    Matrix v;
    MatcherHyper hyper;

    /// All-ones M and V: every feature passes unchanged.
    static GraphMatcherState initial(std::size_t n_f, const MatcherHyper& hyper);

    std::size_t n_features() const noexcept { return m.rows(); }
    std::size_t n_structures() const noexcept { return m.cols(); }
    friend bool operator==(const GraphMatcherState&, const GraphMatcherState&) = default;
};

struct ModelDims {
    std::size_t n_l = 0;
    std::size_t n_t = 0;
    std::size_t n_p = 0;
    std::size_t n_f = 256;
    std::size_t n_h = 512;

    std::size_t n_in() const noexcept { return n_l * n_t; }
    std::size_t n_out() const noexcept { return n_p * n_p; }
    void validate() const;
    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct TrainConfig {
    double lr = 1e-3;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::size_t max_iters = 8000;
    LossKind loss = LossKind::MSE;
    NormalizationPolicy normalization = NormalizationPolicy::ZScore;
    double slope = 0.01;
    std::size_t eval_interval = 50; // iterations between validation checks
    std::uint64_t seed = 0;
    MatcherHyper matcher;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct Standardizer {
    std::vector<double> offset;
    std::vector<double> scale;

    static Standardizer fit(std::span<const std::vector<double>> rows, NormalizationPolicy policy);
    static Standardizer identity(std::size_t n);
    std::size_t size() const noexcept { return offset.size(); }
    void apply(std::span<double> values) const;
    void invert(std::span<double> values) const;
    friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

struct CGameModel {
    ModelDims dims;
    Mlp2Params fwd_enc; // n_in -> n_f
    Mlp2Params fwd_dec; // n_f -> n_out
    Mlp2Params inv_enc; // n_out -> n_f
    Mlp2Params inv_dec; // n_f -> n_in
    GraphMatcherState matcher;
    Standardizer counts_norm;
    Standardizer od_norm;
    TrainConfig config;

    /// Randomly initialised model (He-uniform weights, zero biases) with an all-ones matcher.
    static CGameModel initialize(const ModelDims& dims, const TrainConfig& config);
    void validate() const;
    /// Rounds every parameter, M and V to float precision (the persisted precision).
    void round_to_f32();
    friend bool operator==(const CGameModel&, const CGameModel&) = default;
};

std::vector<double> flatten_counts(const TrafficCountsMatrix& counts);
std::vector<double> flatten_od(const ODMatrix& od);
ODMatrix unflatten_od(std::span<const double> values, std::size_t n_p);
TrafficCountsMatrix unflatten_counts(std::span<const double> values, std::size_t n_l, std::size_t n_t,
                                     double slice_s = 0.0);

/// Link-major flattening of F followed by the model's input standardisation.
std::vector<double> flatten_input(const CGameModel& model, const TrafficCountsMatrix& counts);

Matrix encode(const Mlp2Params& encoder, const Matrix& x);
Matrix decode(const Mlp2Params& decoder, const Matrix& g);

/// Per-feature pass rate derived from M and V.
std::vector<double> matcher_gate(const GraphMatcherState& matcher);
/// g[b, f] = h[b, f] * gate[f].
Matrix apply_matcher(const Matrix& h, const GraphMatcherState& matcher);
Matrix apply_gate(const Matrix& h, std::span<const double> gate);

/// Forward-encoded (h_x) and inverse-encoded (h_y) features of one mini-batch.
struct FeaturePair {
    Matrix hx;
    Matrix hy;
};

/// One batch-cosine column per pair, columns permuted by `rng` when given.
Matrix matcher_candidates(std::span<const FeaturePair> pairs, Rng* permute = nullptr);

/// V reset to ones, then V <- lambda*V + structure_cosine for each pair in order.
Matrix matcher_value_refresh(const GraphMatcherState& matcher, std::span<const FeaturePair> pairs);

/// Indices of the `keep` columns with the highest value, in descending value order;
/// ties resolve to the lower index.
std::vector<std::size_t> top_structures(std::span<const double> values, std::size_t keep);
/// The columns of `m` selected by top_structures, in that order.
Matrix retain_top_structures(const Matrix& m, std::span<const double> values, std::size_t keep);

/// One graph-structure update: p candidate columns with interleaved discounted V accumulation,
/// retention of the best n_s - p old columns, append, then a q-step value refresh.
GraphMatcherState matcher_step(const GraphMatcherState& matcher, std::span<const FeaturePair> candidate_pairs,
                               std::span<const FeaturePair> value_pairs, Rng& rng);

double loss_value(LossKind kind, const Matrix& prediction, const Matrix& target);
/// d loss / d prediction.
Matrix loss_grad(LossKind kind, const Matrix& prediction, const Matrix& target);

/// Loss and exact gradients of one direction: loss(decode(gate * encode(x)), target),
/// with the gate held constant.
struct DirectionPass {
    double loss = 0.0;
    Matrix prediction;
    Matrix features; // encoder output h
    numcore::Mlp2Params enc_grad;
    numcore::Mlp2Params dec_grad;
    Matrix input_grad;
};

DirectionPass direction_pass(const Mlp2Params& encoder, const Mlp2Params& decoder, std::span<const double> gate,
                             const Matrix& x, const Matrix& target, LossKind kind);

struct LossCurve {
    std::vector<double> train;                              // per iteration
    std::vector<std::pair<std::size_t, double>> validation; // (iteration, loss)
    std::size_t matcher_steps = 0;
    std::size_t best_iteration = 0;
    friend bool operator==(const LossCurve&, const LossCurve&) = default;
};

struct TrainResult {
    CGameModel model;
    LossCurve curve;
};

/// Alternates `update_interval` gradient iterations with one matcher step. Returns the
/// snapshot with the lowest validation loss (rounded to float precision).
TrainResult train(const simkit::Dataset& dataset, const TrainConfig& config, const ModelDims& dims);
/// Same schedule with the matcher frozen at all-ones (identity gate).
TrainResult train_ablation(const simkit::Dataset& dataset, const TrainConfig& config, const ModelDims& dims);

/// Dimensions implied by a dataset with the given feature/hidden widths.
ModelDims dims_for(const simkit::Dataset& dataset, std::size_t n_f, std::size_t n_h);

ODMatrix predict_od(const CGameModel& model, const TrafficCountsMatrix& counts);
TrafficCountsMatrix predict_counts(const CGameModel& model, const ODMatrix& od);

inline constexpr int kModelFormatVersion = 1;

/// Writes `dir/model.json` and `dir/model.bin` atomically.
void save_model(const CGameModel& model, const std::filesystem::path& dir);
CGameModel load_model(const std::filesystem::path& dir);

void to_json(nlohmann::json& j, const MatcherHyper& h);
void to_json(nlohmann::json& j, const TrainConfig& c);
MatcherHyper matcher_hyper_from_json(const nlohmann::json& j, const std::string& prefix);
/// Reads a train section; the matcher hyperparameters live in a separate object.
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& prefix);

} // namespace cgame::model
