#include "bpp/diffnet.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "bpp/errors.hpp"
#include "bpp/rng.hpp"

namespace bpp {

namespace {

double act_eval(Activation a, double z)
{
    switch (a) {
    case Activation::Identity:
        return z;
    case Activation::Tanh:
        return std::tanh(z);
    case Activation::Softplus:
        return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    }
    return z;
}

// Derivative as a function of the pre-activation.
double act_deriv(Activation a, double z)
{
    switch (a) {
    case Activation::Identity:
        return 1.0;
    case Activation::Tanh: {
        double t = std::tanh(z);
        return 1.0 - t * t;
    }
    case Activation::Softplus:
        return 1.0 / (1.0 + std::exp(-z));
    }
    return 1.0;
}

Eigen::MatrixXd apply_act(Activation a, const Eigen::MatrixXd& z)
{
    if (a == Activation::Identity)
        return z;
    return z.unaryExpr([a](double v) { return act_eval(a, v); });
}

} // namespace

Activation activation_from_name(const std::string& name)
{
    if (name == "identity")
        return Activation::Identity;
    if (name == "tanh")
        return Activation::Tanh;
    if (name == "softplus")
        return Activation::Softplus;
    throw std::invalid_argument("unknown activation: " + name);
}

std::string activation_name(Activation a)
{
    switch (a) {
    case Activation::Identity:
        return "identity";
    case Activation::Tanh:
        return "tanh";
    case Activation::Softplus:
        return "softplus";
    }
    return "identity";
}

AffineMap AffineMap::identity(int dim)
{
    AffineMap m;
    m.offset = Eigen::VectorXd::Zero(dim);
    m.scale = Eigen::VectorXd::Ones(dim);
    return m;
}

DiffNet DiffNet::make_mlp(const std::vector<int>& layer_sizes, Activation hidden_act,
                          std::uint64_t seed)
{
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("make_mlp: need at least input and output sizes");

    Rng rng(seed);
    DiffNet net;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        int in = layer_sizes[l];
        int out = layer_sizes[l + 1];
        Layer layer;
        layer.W.resize(out, in);
        double r = std::sqrt(6.0 / static_cast<double>(in + out));
        for (int i = 0; i < out; ++i)
            for (int j = 0; j < in; ++j)
                layer.W(i, j) = uniform_in(rng, -r, r);
        layer.b = Eigen::VectorXd::Zero(out);
        layer.act = (l + 2 < layer_sizes.size()) ? hidden_act : Activation::Identity;
        net.layers.push_back(std::move(layer));
    }
    net.in_map = AffineMap::identity(layer_sizes.front());
    net.out_map = AffineMap::identity(layer_sizes.back());
    return net;
}

int DiffNet::input_dim() const
{
    return layers.empty() ? 0 : static_cast<int>(layers.front().W.cols());
}

int DiffNet::output_dim() const
{
    return layers.empty() ? 0 : static_cast<int>(layers.back().W.rows());
}

std::size_t DiffNet::param_count() const
{
    std::size_t n = 0;
    for (const auto& l : layers)
        n += static_cast<std::size_t>(l.W.size()) + static_cast<std::size_t>(l.b.size());
    return n;
}

Eigen::MatrixXd DiffNet::forward(const Eigen::MatrixXd& inputs) const
{
    GradTape tape;
    return forward(inputs, tape);
}

Eigen::MatrixXd DiffNet::forward(const Eigen::MatrixXd& inputs, GradTape& tape) const
{
    if (inputs.rows() != input_dim())
        throw std::invalid_argument("DiffNet::forward: input dimension mismatch");

    const Eigen::Index n = inputs.cols();
    tape.preacts.clear();
    tape.activations.clear();
    tape.consumed = false;

    Eigen::MatrixXd a = (inputs.colwise() - in_map.offset).array().colwise() /
                        in_map.scale.array();
    tape.input_norm = a;

    for (const auto& layer : layers) {
        Eigen::MatrixXd z(layer.W.rows(), n);
        // Column-at-a-time so each sample's arithmetic is independent of the
        // batch it travels in.
        for (Eigen::Index j = 0; j < n; ++j) {
            z.col(j).noalias() = layer.W * a.col(j);
            z.col(j) += layer.b;
        }
        tape.preacts.push_back(z);
        a = apply_act(layer.act, z);
        tape.activations.push_back(a);
    }

    Eigen::MatrixXd y = (a.array().colwise() * out_map.scale.array()).colwise() +
                        out_map.offset.array();
    return y;
}

Eigen::MatrixXd DiffNet::backward(GradTape& tape, const Eigen::MatrixXd& dY,
                                  ParamGrads& grads) const
{
    if (tape.consumed)
        throw StaleTapeError("DiffNet::backward: tape already consumed");
    if (tape.preacts.size() != layers.size())
        throw std::invalid_argument("DiffNet::backward: tape does not match net");
    if (dY.rows() != output_dim() || dY.cols() != tape.input_norm.cols())
        throw std::invalid_argument("DiffNet::backward: cotangent shape mismatch");
    tape.consumed = true;

    const Eigen::Index n = dY.cols();
    grads.dW.assign(layers.size(), Eigen::MatrixXd());
    grads.db.assign(layers.size(), Eigen::VectorXd());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        grads.dW[l] = Eigen::MatrixXd::Zero(layers[l].W.rows(), layers[l].W.cols());
        grads.db[l] = Eigen::VectorXd::Zero(layers[l].b.size());
    }

    Eigen::MatrixXd da = dY.array().colwise() * out_map.scale.array();

    for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
        const Layer& layer = layers[static_cast<std::size_t>(l)];
        const Eigen::MatrixXd& z = tape.preacts[static_cast<std::size_t>(l)];
        const Eigen::MatrixXd& a_prev =
            (l == 0) ? tape.input_norm : tape.activations[static_cast<std::size_t>(l - 1)];

        Eigen::MatrixXd dz = da;
        if (layer.act != Activation::Identity) {
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index i = 0; i < dz.rows(); ++i)
                    dz(i, j) *= act_deriv(layer.act, z(i, j));
        }

        auto& dW = grads.dW[static_cast<std::size_t>(l)];
        auto& db = grads.db[static_cast<std::size_t>(l)];
        Eigen::MatrixXd da_prev(layer.W.cols(), n);
        for (Eigen::Index j = 0; j < n; ++j) {
            dW.noalias() += dz.col(j) * a_prev.col(j).transpose();
            db += dz.col(j);
            da_prev.col(j).noalias() = layer.W.transpose() * dz.col(j);
        }
        da = std::move(da_prev);
    }

    // Undo the input normalization.
    return da.array().colwise() / in_map.scale.array();
}

double DiffNet::value(const Eigen::VectorXd& x) const
{
    if (output_dim() != 1)
        throw std::invalid_argument("DiffNet::value: net is not scalar-output");
    return forward(x)(0, 0);
}

Eigen::VectorXd DiffNet::input_gradient(const Eigen::VectorXd& x) const
{
    if (output_dim() != 1)
        throw std::invalid_argument("DiffNet::input_gradient: net is not scalar-output");
    GradTape tape;
    forward(x, tape);
    ParamGrads grads;
    Eigen::MatrixXd dy = Eigen::MatrixXd::Ones(1, 1);
    return backward(tape, dy, grads).col(0);
}

nlohmann::json DiffNet::to_json() const
{
    nlohmann::json j;
    j["version"] = 2;
    std::vector<int> sizes;
    sizes.push_back(input_dim());
    for (const auto& l : layers)
        sizes.push_back(static_cast<int>(l.W.rows()));
    j["layer_sizes"] = sizes;
    // Single hidden-activation name; output layer is always linear.
    Activation hidden = layers.size() > 1 ? layers.front().act : Activation::Identity;
    j["activation"] = activation_name(hidden);

    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (const auto& l : layers) {
        std::vector<double> w; // row-major
        w.reserve(static_cast<std::size_t>(l.W.size()));
        for (Eigen::Index i = 0; i < l.W.rows(); ++i)
            for (Eigen::Index k = 0; k < l.W.cols(); ++k)
                w.push_back(l.W(i, k));
        weights.push_back(w);
        biases.push_back(std::vector<double>(l.b.data(), l.b.data() + l.b.size()));
    }
    j["weights"] = std::move(weights);
    j["biases"] = std::move(biases);
    auto vec = [](const Eigen::VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    j["input_offset"] = vec(in_map.offset);
    j["input_scale"] = vec(in_map.scale);
    j["output_offset"] = vec(out_map.offset);
    j["output_scale"] = vec(out_map.scale);
    if (!model_tag.empty())
        j["model"] = model_tag;
    return j;
}

DiffNet DiffNet::from_json(const nlohmann::json& j)
{
    DiffNet net;
    std::vector<int> sizes = j.at("layer_sizes").get<std::vector<int>>();
    if (sizes.size() < 2)
        throw std::invalid_argument("DiffNet::from_json: bad layer_sizes");
    Activation hidden = activation_from_name(j.at("activation").get<std::string>());

    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != sizes.size() - 1 || biases.size() != sizes.size() - 1)
        throw std::invalid_argument("DiffNet::from_json: layer count mismatch");

    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        int in = sizes[l];
        int out = sizes[l + 1];
        std::vector<double> w = weights[l].get<std::vector<double>>();
        std::vector<double> b = biases[l].get<std::vector<double>>();
        if (w.size() != static_cast<std::size_t>(in) * static_cast<std::size_t>(out) ||
            b.size() != static_cast<std::size_t>(out))
            throw std::invalid_argument("DiffNet::from_json: weight shape mismatch");
        Layer layer;
        layer.W.resize(out, in);
        for (int i = 0; i < out; ++i)
            for (int k = 0; k < in; ++k)
                layer.W(i, k) = w[static_cast<std::size_t>(i) * in + k];
        layer.b = Eigen::Map<Eigen::VectorXd>(b.data(), out);
        layer.act = (l + 2 < sizes.size()) ? hidden : Activation::Identity;
        net.layers.push_back(std::move(layer));
    }

    auto vec = [&j](const char* key, int dim) {
        std::vector<double> v = j.at(key).get<std::vector<double>>();
        if (v.size() != static_cast<std::size_t>(dim))
            throw std::invalid_argument(std::string("DiffNet::from_json: bad ") + key);
        return Eigen::Map<Eigen::VectorXd>(v.data(), dim).eval();
    };
    net.in_map.offset = vec("input_offset", sizes.front());
    net.in_map.scale = vec("input_scale", sizes.front());
    net.out_map.offset = vec("output_offset", sizes.back());
    net.out_map.scale = vec("output_scale", sizes.back());
    if (j.contains("model"))
        net.model_tag = j.at("model").get<std::string>();
    return net;
}

void DiffNet::save(const std::filesystem::path& path) const
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("DiffNet::save: cannot open " + path.string());
    out << to_json().dump(2) << "\n";
    if (!out)
        throw std::runtime_error("DiffNet::save: write failed for " + path.string());
}

DiffNet DiffNet::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("DiffNet::load: cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

AdamState AdamState::for_net(const DiffNet& net)
{
    AdamState s;
    for (const auto& l : net.layers) {
        s.mW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
        s.vW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
        s.mb.push_back(Eigen::VectorXd::Zero(l.b.size()));
        s.vb.push_back(Eigen::VectorXd::Zero(l.b.size()));
    }
    return s;
}

void adam_step(DiffNet& net, const ParamGrads& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps)
{
    if (grads.dW.size() != net.layers.size() || state.mW.size() != net.layers.size())
        throw std::invalid_argument("adam_step: shape mismatch");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& W = net.layers[l].W;
        auto& b = net.layers[l].b;
        state.mW[l] = beta1 * state.mW[l] + (1.0 - beta1) * grads.dW[l];
        state.vW[l] = beta2 * state.vW[l].array() + (1.0 - beta2) * grads.dW[l].array().square();
        state.mb[l] = beta1 * state.mb[l] + (1.0 - beta1) * grads.db[l];
        state.vb[l] = beta2 * state.vb[l].array() + (1.0 - beta2) * grads.db[l].array().square();

        W.array() -= lr * (state.mW[l].array() / bc1) /
                     ((state.vW[l].array() / bc2).sqrt() + eps);
        b.array() -= lr * (state.mb[l].array() / bc1) /
                     ((state.vb[l].array() / bc2).sqrt() + eps);
    }
}

} // namespace bpp
