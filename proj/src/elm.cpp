#include "neuroloop/elm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace neuroloop {

double AnalogConfig::saturation() const {
    return std::ldexp(1.0, counter_bits) - 1.0;
}

double AnalogConfig::calibration_target() const {
    return std::ldexp(1.0, std::min(counter_bits, 8) - 1);
}

void AnalogConfig::validate() const {
    if (!(sigma_m >= 0.0)) throw InvalidArgument("analog: sigma_m must be >= 0");
    if (counter_bits < 1 || counter_bits > 32) {
        throw InvalidArgument("analog: counter_bits must be in [1, 32]");
    }
    if (!(gain > 0.0) || !std::isfinite(gain)) throw InvalidArgument("analog: gain K must be > 0");
}

ElmModel init_model(std::size_t inputs, std::size_t hidden, std::size_t classes,
                    std::uint64_t seed, std::optional<AnalogConfig> analog) {
    if (inputs < 1 || hidden < 1 || classes < 1) {
        throw InvalidArgument("init_model: D, L and C must be >= 1");
    }
    if (analog) analog->validate();

    ElmModel m;
    m.inputs = inputs;
    m.hidden = hidden;
    m.classes = classes;
    m.seed = seed;
    m.analog = analog;
    m.weights.resize(static_cast<Eigen::Index>(inputs), static_cast<Eigen::Index>(hidden));
    m.bias.resize(static_cast<Eigen::Index>(hidden));
    m.beta = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(hidden),
                                   static_cast<Eigen::Index>(classes));

    std::mt19937_64 gen(seed);
    if (analog) {
        std::normal_distribution<double> z(0.0, 1.0);
        std::bernoulli_distribution flip(0.5);
        for (Eigen::Index i = 0; i < m.weights.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.weights.cols(); ++j) {
                double w = std::exp(analog->sigma_m * z(gen));
                if (analog->signed_weights && flip(gen)) w = -w;
                m.weights(i, j) = w;
            }
        }
        // Oscillator offset as a fraction of the calibrated median input.
        std::uniform_real_distribution<double> offset(0.0, 0.1);
        for (Eigen::Index j = 0; j < m.bias.size(); ++j) m.bias(j) = offset(gen);
    } else {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (Eigen::Index i = 0; i < m.weights.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.weights.cols(); ++j) m.weights(i, j) = u(gen);
        }
        for (Eigen::Index j = 0; j < m.bias.size(); ++j) m.bias(j) = u(gen);
    }
    return m;
}

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
    return {x.data(), static_cast<Eigen::Index>(x.size())};
}

// Analog bias is stored as a fraction of the median input; target / K
// recovers that median once the gain is calibrated.
double bias_scale(const ElmModel& model) {
    return model.analog ? model.analog->calibration_target() / model.analog->gain : 1.0;
}

}  // namespace

Eigen::VectorXd pre_activation(const ElmModel& model, std::span<const double> x) {
    if (x.size() != model.inputs) {
        throw InvalidArgument("feature length " + std::to_string(x.size()) +
                              " does not match model input dimension " +
                              std::to_string(model.inputs));
    }
    return model.weights.transpose() * as_vector(x) + model.bias * bias_scale(model);
}

HiddenActivation hidden(const ElmModel& model, std::span<const double> x) {
    Eigen::VectorXd pre = pre_activation(model, x);
    HiddenActivation h;
    h.values.resize(static_cast<std::size_t>(pre.size()));
    if (!model.analog) {
        for (Eigen::Index j = 0; j < pre.size(); ++j) h.values[j] = std::max(0.0, pre(j));
        return h;
    }
    const double k = model.analog->gain;
    const double sat = model.analog->saturation();
    for (Eigen::Index j = 0; j < pre.size(); ++j) {
        h.values[j] = std::min(std::floor(k * std::max(0.0, pre(j))), sat);
    }
    h.quantized = true;
    return h;
}

HiddenActivation hidden_unquantized(const ElmModel& model, std::span<const double> x) {
    Eigen::VectorXd pre = pre_activation(model, x);
    const double k = model.analog ? model.analog->gain : 1.0;
    HiddenActivation h;
    h.values.resize(static_cast<std::size_t>(pre.size()));
    for (Eigen::Index j = 0; j < pre.size(); ++j) h.values[j] = k * std::max(0.0, pre(j));
    return h;
}

std::vector<double> decode(const ElmModel& model, const HiddenActivation& h,
                           bool allow_untrained) {
    if (h.values.size() != model.hidden) {
        throw InvalidArgument("hidden activation length does not match model");
    }
    if (!allow_untrained && !model.trained()) {
        throw NotTrainedError("decoder second layer has not been trained");
    }
    Eigen::VectorXd o = model.beta.transpose() * as_vector(h.values);
    return {o.data(), o.data() + o.size()};
}

std::size_t classify_index(std::span<const double> o) {
    if (o.empty()) throw InvalidArgument("classify: empty output vector");
    std::size_t best = 0;
    for (std::size_t k = 0; k < o.size(); ++k) {
        if (std::isnan(o[k])) throw NumericError("classify: NaN in decoder output");
        if (o[k] > o[best]) best = k;
    }
    return best;
}

Command classify(std::span<const double> o) {
    if (o.size() != kNumCommands) {
        throw InvalidArgument("classify: output length must equal the command count");
    }
    return command_from_index(classify_index(o));
}

ElmModel train(const ElmModel& model, const TrainingSet& data) {
    const auto& h = data.hidden;
    const auto& t = data.targets;
    if (h.rows() < 1) throw TrainingError("train: no training rows");
    if (h.rows() != t.rows()) throw InvalidArgument("train: H and T row counts differ");
    if (h.cols() != static_cast<Eigen::Index>(model.hidden)) {
        throw InvalidArgument("train: H column count does not match hidden size");
    }
    if (t.cols() != static_cast<Eigen::Index>(model.classes)) {
        throw InvalidArgument("train: T column count does not match class count");
    }
    if (!(data.lambda >= 0.0)) throw InvalidArgument("train: lambda must be >= 0");
    if (!h.allFinite() || !t.allFinite()) throw NumericError("train: non-finite training data");

    // Augmented least squares [H; sqrt(lambda) I] beta = [T; 0], solved by
    // column-pivoted QR rather than the normal equations.
    const Eigen::Index n = h.rows();
    const Eigen::Index l = h.cols();
    Eigen::MatrixXd a(n + l, l);
    a.topRows(n) = h;
    a.bottomRows(l) = std::sqrt(data.lambda) * Eigen::MatrixXd::Identity(l, l);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + l, t.cols());
    rhs.topRows(n) = t;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < l) {
        throw SingularityError("train: hidden matrix is rank deficient; use lambda > 0");
    }
    ElmModel out = model;
    out.beta = qr.solve(rhs);
    out.lambda = data.lambda;
    if (!out.beta.allFinite()) throw NumericError("train: non-finite output weights");
    return out;
}

ElmModel calibrate(const ElmModel& model, std::span<const std::vector<double>> features) {
    if (!model.analog) return model;
    std::vector<double> positive;
    for (const auto& x : features) {
        if (x.size() != model.inputs) throw InvalidArgument("calibrate: feature length mismatch");
        Eigen::VectorXd drive = model.weights.transpose() * as_vector(x);
        for (Eigen::Index j = 0; j < drive.size(); ++j) {
            if (drive(j) > 0.0) positive.push_back(drive(j));
        }
    }
    if (positive.empty()) return model;
    auto mid = positive.begin() + static_cast<std::ptrdiff_t>(positive.size() / 2);
    std::nth_element(positive.begin(), mid, positive.end());
    ElmModel out = model;
    out.analog->gain = out.analog->calibration_target() / *mid;
    return out;
}

ElmModel fit(const ElmModel& model, std::span<const std::vector<double>> features,
             std::span<const Command> labels, double lambda) {
    if (features.size() != labels.size()) {
        throw InvalidArgument("fit: feature and label counts differ");
    }
    if (features.empty()) throw TrainingError("fit: no training rows");
    ElmModel calibrated = calibrate(model, features);

    TrainingSet data;
    const auto n = static_cast<Eigen::Index>(features.size());
    data.hidden.resize(n, static_cast<Eigen::Index>(model.hidden));
    data.targets = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(model.classes));
    data.lambda = lambda;
    for (Eigen::Index r = 0; r < n; ++r) {
        auto h = hidden(calibrated, features[static_cast<std::size_t>(r)]);
        data.hidden.row(r) = Eigen::Map<const Eigen::RowVectorXd>(
            h.values.data(), static_cast<Eigen::Index>(h.values.size()));
        const auto cls = static_cast<Eigen::Index>(index_of(labels[static_cast<std::size_t>(r)]));
        if (cls >= data.targets.cols()) throw InvalidArgument("fit: label outside class range");
        data.targets(r, cls) = 1.0;
    }
    return train(calibrated, data);
}

Command predict(const ElmModel& model, std::span<const double> x) {
    return classify(decode(model, hidden(model, x)));
}

double offline_accuracy(const ElmModel& model, std::span<const std::vector<double>> features,
                        std::span<const Command> labels) {
    if (features.size() != labels.size() || features.empty()) {
        throw InvalidArgument("offline_accuracy: need equal, non-empty feature and label sets");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (predict(model, features[i]) == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(features.size());
}

namespace {

nlohmann::json matrix_row_major(const Eigen::MatrixXd& m) {
    auto arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
    }
    return arr;
}

Eigen::MatrixXd matrix_from(const nlohmann::json& arr, std::size_t rows, std::size_t cols,
                            const char* name) {
    if (!arr.is_array() || arr.size() != rows * cols) {
        throw InvalidArgument(std::string("model JSON: '") + name + "' has wrong size");
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = arr[k++].get<double>();
    }
    return m;
}

}  // namespace

std::string model_to_json(const ElmModel& model) {
    nlohmann::ordered_json j;
    j["D"] = model.inputs;
    j["L"] = model.hidden;
    j["C"] = model.classes;
    j["seed"] = model.seed;
    j["analog"] = model.analog.has_value();
    if (model.analog) {
        j["sigma_m"] = model.analog->sigma_m;
        j["counter_bits"] = model.analog->counter_bits;
        j["K"] = model.analog->gain;
        j["signed"] = model.analog->signed_weights;
    } else {
        j["sigma_m"] = nullptr;
        j["counter_bits"] = nullptr;
        j["K"] = nullptr;
        j["signed"] = nullptr;
    }
    j["lambda"] = model.lambda;
    j["W"] = matrix_row_major(model.weights);
    Eigen::MatrixXd b = model.bias.transpose();
    j["b"] = matrix_row_major(b);
    j["beta"] = matrix_row_major(model.beta);
    return j.dump() + "\n";
}

ElmModel model_from_json(const std::string& text) {
    try {
        auto j = nlohmann::json::parse(text);
        ElmModel m;
        m.inputs = j.at("D").get<std::size_t>();
        m.hidden = j.at("L").get<std::size_t>();
        m.classes = j.at("C").get<std::size_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.lambda = j.at("lambda").get<double>();
        if (j.value("analog", false)) {
            AnalogConfig a;
            a.sigma_m = j.at("sigma_m").get<double>();
            a.counter_bits = j.at("counter_bits").get<int>();
            a.gain = j.at("K").get<double>();
            a.signed_weights = j.at("signed").get<bool>();
            a.validate();
            m.analog = a;
        }
        m.weights = matrix_from(j.at("W"), m.inputs, m.hidden, "W");
        m.bias = matrix_from(j.at("b"), 1, m.hidden, "b").transpose();
        m.beta = matrix_from(j.at("beta"), m.hidden, m.classes, "beta");
        if (!m.beta.allFinite()) throw InvalidArgument("model JSON: non-finite beta");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("model JSON: ") + e.what());
    }
}

void save_model(const ElmModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write model file " + path);
    out << model_to_json(model);
}

ElmModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read model file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace neuroloop
