#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace bpp {

enum class Activation { Identity, Tanh, Softplus };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation a);

/// Elementwise affine map. On the input side x_norm = (x - offset) / scale;
/// on the output side y = offset + scale .* a.
struct AffineMap {
    Eigen::VectorXd offset;
    Eigen::VectorXd scale;

    static AffineMap identity(int dim);
};

struct Layer {
    Eigen::MatrixXd W; // out x in
    Eigen::VectorXd b; // out
    Activation act = Activation::Identity;
};

/// Cached forward intermediates for one backward pass. Single use.
struct GradTape {
    Eigen::MatrixXd input_norm;               // normalized input batch
    std::vector<Eigen::MatrixXd> preacts;     // z_l, one per layer
    std::vector<Eigen::MatrixXd> activations; // a_l = act(z_l)
    bool consumed = false;
};

struct ParamGrads {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
};

/// Fixed-topology feedforward net: affine input normalization, dense layers
/// with elementwise activations, affine output map. Columns are samples.
/// All batch math is evaluated column by column so results do not depend on
/// how a batch is split.
class DiffNet {
public:
    DiffNet() = default;

    /// Hidden layers get `hidden_act`; the last layer is linear. Weights are
    /// Glorot-uniform from the given seed, biases zero, affine maps identity.
    static DiffNet make_mlp(const std::vector<int>& layer_sizes, Activation hidden_act,
                            std::uint64_t seed);

    int input_dim() const;
    int output_dim() const;
    std::size_t param_count() const;

    Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;
    Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, GradTape& tape) const;

    /// Backpropagate the output cotangent dY (out x n). Writes parameter
    /// gradients (summed over columns) into `grads` and returns gradients
    /// w.r.t. the raw inputs. Throws StaleTapeError on tape reuse.
    Eigen::MatrixXd backward(GradTape& tape, const Eigen::MatrixXd& dY, ParamGrads& grads) const;

    /// Scalar-output convenience helpers.
    double value(const Eigen::VectorXd& x) const;
    Eigen::VectorXd input_gradient(const Eigen::VectorXd& x) const;

    nlohmann::json to_json() const;
    static DiffNet from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static DiffNet load(const std::filesystem::path& path);

    std::vector<Layer> layers;
    AffineMap in_map;
    AffineMap out_map;
    std::string model_tag; // optional free-form tag carried through the file
};

struct AdamState {
    std::vector<Eigen::MatrixXd> mW, vW;
    std::vector<Eigen::VectorXd> mb, vb;
    long step = 0;

    static AdamState for_net(const DiffNet& net);
};

/// In-place Adam update with bias correction. Deterministic.
void adam_step(DiffNet& net, const ParamGrads& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

} // namespace bpp
