#include "quadml/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "quadml/errors.hpp"
#include "quadml/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts are unsupported");

namespace quadml {

namespace {

constexpr char kMagic[4] = {'Q', 'N', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> values(n);
    for (double& v : values) v = rng.uniform(-bound, bound);
    return Tensor::from_values(std::move(shape), std::move(values), true);
}

void validate(const ModelConfig& config) {
    if (config.input_dim == 0) throw ConfigError("model: input_dim must be positive");
    if (config.embed_dim < 2) throw ConfigError("model: embed_dim must be at least 2");
    if (config.num_classes < 2) throw ConfigError("model: num_classes must be at least 2");
    if (config.leaky_slope <= 0.0) throw ConfigError("model: leaky_slope must be positive");
    if (config.bn_momentum <= 0.0 || config.bn_momentum >= 1.0) {
        throw ConfigError("model: bn_momentum must lie in (0, 1)");
    }
    if (config.bn_eps <= 0.0) throw ConfigError("model: bn_eps must be positive");
    for (std::size_t h : config.backbone_hidden) {
        if (h == 0) throw ConfigError("model: backbone_hidden widths must be positive");
    }
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw DataError("checkpoint: unexpected end of file");
    return value;
}

void write_buffer(std::ostream& out, std::span<const double> values) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
}

void read_buffer(std::istream& in, std::span<double> values) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw DataError("checkpoint: unexpected end of file");
}

} // namespace

std::vector<std::string> config_warnings(const ModelConfig& config) {
    std::vector<std::string> warnings;
    if (config.embed_dim > config.num_classes + 1) {
        warnings.push_back(
            "model: embed_dim " + std::to_string(config.embed_dim) + " exceeds num_classes+1 (" +
            std::to_string(config.num_classes + 1) +
            "); a classifier over fewer classes than embedding dimensions can be poorly "
            "conditioned and prone to overfitting");
    }
    return warnings;
}

Model::Model(const ModelConfig& config) : config_(config) {
    validate(config_);
    for (const std::string& w : config_warnings(config_)) {
        std::cerr << "warning: " << w << "\n";
    }
    Rng rng(config_.seed);
    std::size_t in = config_.input_dim;
    for (std::size_t width : config_.backbone_hidden) {
        backbone_.push_back({uniform_init({in, width}, in, rng), uniform_init({width}, in, rng)});
        in = width;
    }
    backbone_.push_back(
        {uniform_init({in, config_.embed_dim}, in, rng), uniform_init({config_.embed_dim}, in, rng)});

    const std::size_t d = config_.embed_dim;
    head_in_ = {uniform_init({d, d}, d, rng), uniform_init({d}, d, rng)};
    bn_gamma_ = Tensor::full({d}, 1.0, true);
    bn_beta_ = Tensor::zeros({d}, true);
    running_mean_.assign(d, 0.0);
    running_var_.assign(d, 1.0);
    const std::size_t out = config_.num_classes + 1;
    head_out_ = {uniform_init({d, out}, d, rng), uniform_init({out}, d, rng)};
}

Tensor Model::embed(const Tensor& batch) {
    if (batch.shape().size() != 2 || batch.dim(1) != config_.input_dim) {
        throw std::invalid_argument("embed: expected batch of width " +
                                    std::to_string(config_.input_dim));
    }
    Tensor x = batch;
    for (std::size_t i = 0; i + 1 < backbone_.size(); ++i) {
        x = leaky_relu(add_rowvec(matmul(x, backbone_[i].weight), backbone_[i].bias),
                       config_.leaky_slope);
    }
    const LinearLayer& last = backbone_.back();
    return add_rowvec(matmul(x, last.weight), last.bias);
}

Tensor Model::apply_batch_norm(const Tensor& x) {
    const std::size_t d = config_.embed_dim;
    if (mode_ == Mode::train) {
        if (x.dim(0) < 2) {
            throw std::invalid_argument(
                "classify: train-mode batch normalization needs a batch of at least 2 rows");
        }
        BatchNormResult bn = batch_norm_rows(x, bn_gamma_, bn_beta_, config_.bn_eps);
        const double b = static_cast<double>(x.dim(0));
        const double unbias = b / (b - 1.0);
        for (std::size_t j = 0; j < d; ++j) {
            running_mean_[j] = (1.0 - config_.bn_momentum) * running_mean_[j] +
                               config_.bn_momentum * bn.batch_mean[j];
            running_var_[j] = (1.0 - config_.bn_momentum) * running_var_[j] +
                              config_.bn_momentum * bn.batch_var[j] * unbias;
        }
        return bn.output;
    }
    // Eval mode: running statistics only; no graph is needed here.
    const std::size_t rows = x.dim(0);
    std::vector<double> out(rows * d);
    auto data = x.data();
    auto gamma = bn_gamma_.data();
    auto beta = bn_beta_.data();
    for (std::size_t j = 0; j < d; ++j) {
        const double inv = 1.0 / std::sqrt(running_var_[j] + config_.bn_eps);
        for (std::size_t i = 0; i < rows; ++i) {
            out[i * d + j] = gamma[j] * (data[i * d + j] - running_mean_[j]) * inv + beta[j];
        }
    }
    return Tensor::from_values({rows, d}, std::move(out));
}

Tensor Model::classify(const Tensor& embeddings) {
    if (embeddings.shape().size() != 2 || embeddings.dim(1) != config_.embed_dim) {
        throw std::invalid_argument("classify: expected embeddings of width " +
                                    std::to_string(config_.embed_dim));
    }
    Tensor h = add_rowvec(matmul(embeddings, head_in_.weight), head_in_.bias);
    h = apply_batch_norm(h);
    h = leaky_relu(h, config_.leaky_slope);
    return add_rowvec(matmul(h, head_out_.weight), head_out_.bias);
}

std::vector<int> Model::predict(const Tensor& batch) {
    Tensor probs = softmax(classify(embed(batch)));
    const std::size_t rows = probs.dim(0), cols = probs.dim(1);
    std::vector<int> labels(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < cols; ++j) {
            if (probs.at(i, j) > probs.at(i, best)) best = j;
        }
        labels[i] = index_to_label(best);
    }
    return labels;
}

std::vector<Model::NamedParam> Model::parameters() {
    std::vector<NamedParam> params;
    for (std::size_t i = 0; i < backbone_.size(); ++i) {
        params.push_back({"backbone." + std::to_string(i) + ".weight", backbone_[i].weight});
        params.push_back({"backbone." + std::to_string(i) + ".bias", backbone_[i].bias});
    }
    params.push_back({"head_in.weight", head_in_.weight});
    params.push_back({"head_in.bias", head_in_.bias});
    params.push_back({"bn.gamma", bn_gamma_});
    params.push_back({"bn.beta", bn_beta_});
    params.push_back({"head_out.weight", head_out_.weight});
    params.push_back({"head_out.bias", head_out_.bias});
    return params;
}

std::vector<std::vector<double>> Model::snapshot_state() const {
    std::vector<std::vector<double>> state;
    auto self = const_cast<Model*>(this);
    for (auto& param : self->parameters()) {
        auto d = param.tensor.data();
        state.emplace_back(d.begin(), d.end());
    }
    state.push_back(running_mean_);
    state.push_back(running_var_);
    return state;
}

void Model::restore_state(const std::vector<std::vector<double>>& state) {
    auto params = parameters();
    if (state.size() != params.size() + 2) {
        throw std::invalid_argument("restore_state: snapshot does not match this model");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto dst = params[i].tensor.mutable_data();
        if (state[i].size() != dst.size()) {
            throw std::invalid_argument("restore_state: buffer size mismatch at " + params[i].name);
        }
        std::copy(state[i].begin(), state[i].end(), dst.begin());
    }
    running_mean_ = state[params.size()];
    running_var_ = state[params.size() + 1];
}

void Model::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("checkpoint: cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint64_t>(config_.input_dim));
    write_pod(out, static_cast<std::uint64_t>(config_.embed_dim));
    write_pod(out, static_cast<std::uint64_t>(config_.num_classes));
    write_pod(out, static_cast<std::uint64_t>(config_.backbone_hidden.size()));
    for (std::size_t h : config_.backbone_hidden) {
        write_pod(out, static_cast<std::uint64_t>(h));
    }
    write_pod(out, config_.leaky_slope);
    write_pod(out, config_.bn_momentum);
    write_pod(out, config_.bn_eps);
    write_pod(out, static_cast<std::uint64_t>(config_.seed));
    auto self = const_cast<Model*>(this);
    for (auto& param : self->parameters()) {
        if (param.name == "bn.beta") {
            // Running buffers sit between the affine parameters and the output
            // layer, matching in-memory declaration order.
            write_buffer(out, param.tensor.data());
            write_buffer(out, running_mean_);
            write_buffer(out, running_var_);
            continue;
        }
        write_buffer(out, param.tensor.data());
    }
    if (!out) throw ConfigError("checkpoint: write to '" + path + "' failed");
}

Model Model::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("checkpoint: '" + path + "' is not a model checkpoint (bad magic)");
    }
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion) {
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }
    ModelConfig config;
    config.input_dim = read_pod<std::uint64_t>(in);
    config.embed_dim = read_pod<std::uint64_t>(in);
    config.num_classes = read_pod<std::uint64_t>(in);
    const auto n_hidden = read_pod<std::uint64_t>(in);
    config.backbone_hidden.clear();
    for (std::uint64_t i = 0; i < n_hidden; ++i) {
        config.backbone_hidden.push_back(read_pod<std::uint64_t>(in));
    }
    config.leaky_slope = read_pod<double>(in);
    config.bn_momentum = read_pod<double>(in);
    config.bn_eps = read_pod<double>(in);
    config.seed = read_pod<std::uint64_t>(in);

    Model model(config);
    for (auto& param : model.parameters()) {
        if (param.name == "bn.beta") {
            read_buffer(in, param.tensor.mutable_data());
            read_buffer(in, std::span<double>(model.running_mean_));
            read_buffer(in, std::span<double>(model.running_var_));
            continue;
        }
        read_buffer(in, param.tensor.mutable_data());
    }
    return model;
}

Tensor softmax(const Tensor& logits) { return softmax_rows(logits); }

} // namespace quadml
