#include "ivhedge/neural.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include <json.hpp>

#include "ivhedge/csv.hpp"
#include "ivhedge/errors.hpp"

namespace ivhedge {

using nlohmann::json;

int Architecture::cell_input_dim(std::size_t l) const {
    const int base = l == 0 ? input_dim : lstm_widths[l - 1];
    return recurrent ? base + lstm_widths[l] : base;
}

void Architecture::validate() const {
    if (input_dim <= 0) {
        throw ConfigError("architecture: input_dim must be positive");
    }
    for (int w : lstm_widths) {
        if (w <= 0) {
            throw ConfigError("architecture: cell widths must be positive");
        }
    }
    for (int w : ffnn_widths) {
        if (w <= 0) {
            throw ConfigError("architecture: layer widths must be positive");
        }
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw ConfigError("architecture: dropout must lie in [0, 1)");
    }
}

PolicyWeights PolicyWeights::zeros(const Architecture& arch) {
    arch.validate();
    PolicyWeights w;
    w.arch = arch;
    for (std::size_t l = 0; l < arch.lstm_widths.size(); ++l) {
        const int d = arch.lstm_widths[l];
        w.cell_W.push_back(Eigen::MatrixXd::Zero(3 * d, arch.cell_input_dim(l)));
        w.cell_b.push_back(Eigen::MatrixXd::Zero(3 * d, 1));
    }
    int prev = arch.lstm_widths.empty() ? arch.input_dim : arch.lstm_widths.back();
    for (int d : arch.ffnn_widths) {
        w.ffnn_W.push_back(Eigen::MatrixXd::Zero(d, prev));
        w.ffnn_b.push_back(Eigen::MatrixXd::Zero(d, 1));
        prev = d;
    }
    w.out_W = Eigen::MatrixXd::Zero(1, prev);
    w.out_b = Eigen::MatrixXd::Zero(1, 1);
    return w;
}

Eigen::Index PolicyWeights::parameter_count() const {
    Eigen::Index n = 0;
    for_each([&](const Eigen::MatrixXd& m) { n += m.size(); });
    return n;
}

Eigen::VectorXd PolicyWeights::flatten() const {
    Eigen::VectorXd flat(parameter_count());
    Eigen::Index off = 0;
    for_each([&](const Eigen::MatrixXd& m) {
        flat.segment(off, m.size()) = m.reshaped();
        off += m.size();
    });
    return flat;
}

void PolicyWeights::unflatten(const Eigen::VectorXd& flat) {
    if (flat.size() != parameter_count()) {
        throw UsageError("unflatten: size mismatch");
    }
    Eigen::Index off = 0;
    for_each([&](Eigen::MatrixXd& m) {
        m.reshaped() = flat.segment(off, m.size());
        off += m.size();
    });
}

bool PolicyWeights::all_finite() const {
    bool ok = true;
    for_each([&](const Eigen::MatrixXd& m) { ok = ok && m.allFinite(); });
    return ok;
}

PolicyWeights glorot_init(const Architecture& arch, std::uint64_t seed) {
    PolicyWeights w = PolicyWeights::zeros(arch);
    RngStream rng(seed, 0x676c6f726f74ULL);
    auto fill = [&](auto block, int fan_in, int fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (Eigen::Index j = 0; j < block.cols(); ++j) {
            for (Eigen::Index i = 0; i < block.rows(); ++i) {
                block(i, j) = bound * (2.0 * rng.uniform() - 1.0);
            }
        }
    };
    for (std::size_t l = 0; l < arch.lstm_widths.size(); ++l) {
        const int d = arch.lstm_widths[l];
        const int in = arch.cell_input_dim(l);
        for (int g = 0; g < 3; ++g) {
            fill(w.cell_W[l].middleRows(g * d, d), in, d);
        }
    }
    for (auto& m : w.ffnn_W) {
        fill(m.block(0, 0, m.rows(), m.cols()), static_cast<int>(m.cols()), static_cast<int>(m.rows()));
    }
    fill(w.out_W.block(0, 0, 1, w.out_W.cols()), static_cast<int>(w.out_W.cols()), 1);
    return w;
}

Normalizer Normalizer::identity(int dim) {
    return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

Normalizer Normalizer::fit(const Eigen::ArrayXXd& samples) {
    Normalizer n;
    const auto count = static_cast<double>(samples.cols());
    if (samples.cols() == 0) {
        throw UsageError("Normalizer::fit needs at least one sample");
    }
    n.mean = samples.rowwise().sum().matrix() / count;
    n.scale.resize(samples.rows());
    for (Eigen::Index f = 0; f < samples.rows(); ++f) {
        const double var = (samples.row(f) - n.mean(f)).square().sum() / count;
        const double sd = std::sqrt(var);
        n.scale(f) = sd > 1e-12 * std::max(1.0, std::abs(n.mean(f))) ? sd : 1.0;
    }
    return n;
}

Eigen::ArrayXXd Normalizer::apply(const Eigen::ArrayXXd& x) const {
    if (x.rows() != mean.size()) {
        throw UsageError("normalizer dimension does not match the features");
    }
    return (x.colwise() - mean.array()).colwise() / scale.array();
}

BoundWeights bind(Tape& tape, const PolicyWeights& w, bool requires_grad) {
    BoundWeights b;
    for (std::size_t l = 0; l < w.cell_W.size(); ++l) {
        b.cell_W.push_back(tape.leaf(w.cell_W[l].array(), requires_grad));
        b.cell_b.push_back(tape.leaf(w.cell_b[l].array(), requires_grad));
    }
    for (std::size_t j = 0; j < w.ffnn_W.size(); ++j) {
        b.ffnn_W.push_back(tape.leaf(w.ffnn_W[j].array(), requires_grad));
        b.ffnn_b.push_back(tape.leaf(w.ffnn_b[j].array(), requires_grad));
    }
    b.out_W = tape.leaf(w.out_W.array(), requires_grad);
    b.out_b = tape.leaf(w.out_b.array(), requires_grad);
    return b;
}

PolicyWeights gradients(const Tape& tape, const BoundWeights& bw, const Architecture& arch) {
    PolicyWeights g = PolicyWeights::zeros(arch);
    for (std::size_t l = 0; l < g.cell_W.size(); ++l) {
        g.cell_W[l] = tape.grad(bw.cell_W[l]).matrix();
        g.cell_b[l] = tape.grad(bw.cell_b[l]).matrix();
    }
    for (std::size_t j = 0; j < g.ffnn_W.size(); ++j) {
        g.ffnn_W[j] = tape.grad(bw.ffnn_W[j]).matrix();
        g.ffnn_b[j] = tape.grad(bw.ffnn_b[j]).matrix();
    }
    g.out_W = tape.grad(bw.out_W).matrix();
    g.out_b = tape.grad(bw.out_b).matrix();
    return g;
}

Var policy_raw(const BoundWeights& w, const Architecture& arch, Var X, RecurrentState& rec, RngStream* dropout_rng) {
    if (X.rows() != arch.input_dim) {
        throw UsageError("policy input has " + std::to_string(X.rows()) + " features, architecture expects " +
                         std::to_string(arch.input_dim));
    }
    Tape& tape = *X.tape;
    const Eigen::Index n = X.cols();
    Var z = X;
    const bool first_step = rec.hidden.empty();
    for (std::size_t l = 0; l < arch.lstm_widths.size(); ++l) {
        Var input = z;
        if (arch.recurrent) {
            Var prev = first_step ? tape.constant(0.0, arch.lstm_widths[l], n) : rec.hidden[l];
            input = vstack(z, prev);
        }
        z = lstm_cell(w.cell_W[l], w.cell_b[l], input);
        if (arch.recurrent) {
            if (first_step) {
                rec.hidden.push_back(z);
            } else {
                rec.hidden[l] = z;
            }
        }
    }
    const bool use_dropout = dropout_rng != nullptr && arch.dropout > 0.0;
    for (std::size_t j = 0; j < arch.ffnn_widths.size(); ++j) {
        z = dense(w.ffnn_W[j], w.ffnn_b[j], z, Activation::Relu);
        if (use_dropout) {
            const double keep = 1.0 - arch.dropout;
            Array mask(z.rows(), n);
            for (Eigen::Index k = 0; k < mask.size(); ++k) {
                mask.data()[k] = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
            }
            z = mul(z, mask);
        }
    }
    return dense(w.out_W, w.out_b, z, Activation::Identity);
}

PolicyOutput policy_forward(const BoundWeights& w, const Architecture& arch, Var X, RecurrentState& rec, Var bound,
                            RngStream* dropout_rng) {
    const Var z_raw = policy_raw(w, arch, X, rec, dropout_rng);
    return {z_raw, min(z_raw, bound)};
}

AdamState AdamState::for_weights(const PolicyWeights& w, double lr) {
    AdamState s;
    s.m = PolicyWeights::zeros(w.arch);
    s.v = PolicyWeights::zeros(w.arch);
    s.lr = lr;
    return s;
}

void adam_step(PolicyWeights& w, const PolicyWeights& grad, AdamState& opt) {
    if (grad.parameter_count() != w.parameter_count() || opt.m.parameter_count() != w.parameter_count()) {
        throw UsageError("adam_step: shape mismatch");
    }
    ++opt.step;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    std::vector<Eigen::MatrixXd*> wt;
    std::vector<const Eigen::MatrixXd*> gt;
    std::vector<Eigen::MatrixXd*> mt;
    std::vector<Eigen::MatrixXd*> vt;
    w.for_each([&](Eigen::MatrixXd& m) { wt.push_back(&m); });
    grad.for_each([&](const Eigen::MatrixXd& m) { gt.push_back(&m); });
    opt.m.for_each([&](Eigen::MatrixXd& m) { mt.push_back(&m); });
    opt.v.for_each([&](Eigen::MatrixXd& m) { vt.push_back(&m); });
    for (std::size_t k = 0; k < wt.size(); ++k) {
        auto g = gt[k]->array();
        auto m = mt[k]->array();
        auto v = vt[k]->array();
        m = opt.beta1 * m + (1.0 - opt.beta1) * g;
        v = opt.beta2 * v + (1.0 - opt.beta2) * g.square();
        wt[k]->array() -= opt.lr * (m / c1) / ((v / c2).sqrt() + opt.eps);
    }
}

namespace {

constexpr char kMagic[] = "IVHCKPT1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

json arch_to_json(const Architecture& a) {
    return {{"input_dim", a.input_dim},     {"lstm_widths", a.lstm_widths}, {"ffnn_widths", a.ffnn_widths},
            {"recurrent", a.recurrent},     {"dropout", a.dropout},
            {"cell_layout", "stacked gates [input; output; candidate]"}};
}

Architecture arch_from_json(const json& j) {
    Architecture a;
    a.input_dim = j.at("input_dim").get<int>();
    a.lstm_widths = j.at("lstm_widths").get<std::vector<int>>();
    a.ffnn_widths = j.at("ffnn_widths").get<std::vector<int>>();
    a.recurrent = j.at("recurrent").get<bool>();
    a.dropout = j.at("dropout").get<double>();
    a.validate();
    return a;
}

void append_doubles(std::string& out, const Eigen::VectorXd& v) {
    static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");
    const std::size_t off = out.size();
    out.resize(off + static_cast<std::size_t>(v.size()) * sizeof(double));
    if (v.size() > 0) {
        std::memcpy(out.data() + off, v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
    }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file) {
    json h;
    h["format"] = "ivhedge-checkpoint";
    h["version"] = 1;
    h["architecture"] = arch_to_json(ckpt.weights.arch);
    h["parameter_count"] = ckpt.weights.parameter_count();
    h["seed"] = ckpt.seed;
    h["features"] = ckpt.features;
    std::vector<double> mean(ckpt.normalizer.mean.data(), ckpt.normalizer.mean.data() + ckpt.normalizer.mean.size());
    std::vector<double> scale(ckpt.normalizer.scale.data(),
                              ckpt.normalizer.scale.data() + ckpt.normalizer.scale.size());
    h["normalizer"] = {{"mean", mean}, {"scale", scale}};
    h["adam"] = {{"step", ckpt.adam.step},
                 {"lr", ckpt.adam.lr},
                 {"beta1", ckpt.adam.beta1},
                 {"beta2", ckpt.adam.beta2},
                 {"eps", ckpt.adam.eps}};
    h["metadata"] = json::parse(ckpt.metadata_json);
    const std::string header = h.dump();

    std::string out(kMagic, kMagicLen);
    std::uint64_t len = header.size();
    out.append(reinterpret_cast<const char*>(&len), sizeof(len));
    out += header;
    append_doubles(out, ckpt.weights.flatten());
    const bool have_moments = ckpt.adam.m.parameter_count() == ckpt.weights.parameter_count();
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(ckpt.weights.parameter_count());
    append_doubles(out, have_moments ? ckpt.adam.m.flatten() : zero);
    append_doubles(out, have_moments ? ckpt.adam.v.flatten() : zero);
    write_text_file(file, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& file, const Architecture* expected) {
    if (!std::filesystem::exists(file)) {
        throw ConfigError("checkpoint not found: '" + file.string() + "'");
    }
    const std::string data = read_text_file(file);
    if (data.size() < kMagicLen + 8 || data.compare(0, kMagicLen, kMagic) != 0) {
        throw ConfigError(file.string() + ": not an ivhedge checkpoint");
    }
    std::uint64_t len = 0;
    std::memcpy(&len, data.data() + kMagicLen, sizeof(len));
    const std::size_t body = kMagicLen + 8;
    if (len > data.size() - body) {
        throw ConfigError(file.string() + ": truncated header");
    }
    json h;
    try {
        h = json::parse(data.substr(body, len));
    } catch (const json::exception& e) {
        throw ConfigError(file.string() + ": invalid header: " + e.what());
    }
    Checkpoint c;
    try {
        if (h.at("version").get<int>() != 1) {
            throw ConfigError(file.string() + ": unsupported checkpoint version");
        }
        const Architecture arch = arch_from_json(h.at("architecture"));
        if (expected != nullptr && !(*expected == arch)) {
            throw ConfigError(file.string() + ": architecture does not match the requested configuration");
        }
        c.weights = PolicyWeights::zeros(arch);
        c.adam = AdamState::for_weights(c.weights, h.at("adam").at("lr").get<double>());
        c.adam.step = h.at("adam").at("step").get<std::int64_t>();
        c.adam.beta1 = h.at("adam").at("beta1").get<double>();
        c.adam.beta2 = h.at("adam").at("beta2").get<double>();
        c.adam.eps = h.at("adam").at("eps").get<double>();
        c.seed = h.at("seed").get<std::uint64_t>();
        c.features = h.at("features").get<std::vector<std::string>>();
        const auto mean = h.at("normalizer").at("mean").get<std::vector<double>>();
        const auto scale = h.at("normalizer").at("scale").get<std::vector<double>>();
        if (mean.size() != static_cast<std::size_t>(arch.input_dim) || scale.size() != mean.size() ||
            c.features.size() != mean.size()) {
            throw ConfigError(file.string() + ": normalizer/feature count does not match the input width");
        }
        c.normalizer.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        c.normalizer.scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
        c.metadata_json = h.at("metadata").dump();
    } catch (const json::exception& e) {
        throw ConfigError(file.string() + ": malformed header: " + e.what());
    }
    const Eigen::Index n = c.weights.parameter_count();
    const std::size_t bytes = static_cast<std::size_t>(n) * sizeof(double);
    if (data.size() - body - len != 3 * bytes) {
        throw ConfigError(file.string() + ": weight blob size does not match the architecture");
    }
    Eigen::VectorXd buf(n);
    const char* p = data.data() + body + len;
    auto read_block = [&](PolicyWeights& w) {
        if (bytes > 0) {
            std::memcpy(buf.data(), p, bytes);
        }
        p += bytes;
        w.unflatten(buf);
    };
    read_block(c.weights);
    read_block(c.adam.m);
    read_block(c.adam.v);
    if (!c.weights.all_finite()) {
        throw ConfigError(file.string() + ": weights are not finite");
    }
    return c;
}

}  // namespace ivhedge
