#pragma once

#include <cerrno>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tnq/codec.hpp"
#include "tnq/data.hpp"
#include "tnq/error.hpp"
#include "tnq/model.hpp"
#include "tnq/simtrain.hpp"

namespace tnq {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double parse_double_strict(const std::string& key, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
        throw InvalidArgument("config key '" + key + "': invalid number '" + v + "'");
    return x;
}

inline long long parse_int_strict(const std::string& key, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    long long x = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
        throw InvalidArgument("config key '" + key + "': invalid integer '" + v + "'");
    return x;
}

}  // namespace detail

/// Flat key=value configuration. Lines starting with '#' (and anything after
/// a '#' within a line) are comments. Reads are tracked so that keys nobody
/// consumed can be reported as errors.
class ConfigMap {
  public:
    static ConfigMap parse(const std::string& text) {
        ConfigMap cfg;
        std::size_t pos = 0;
        int line_no = 0;
        while (pos <= text.size()) {
            std::size_t eol = text.find('\n', pos);
            std::string line =
                text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
            pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
            ++line_no;
            std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw InvalidArgument("config line " + std::to_string(line_no) +
                                      ": expected key=value, got '" + line + "'");
            std::string key = detail::trim(line.substr(0, eq));
            std::string value = detail::trim(line.substr(eq + 1));
            if (key.empty())
                throw InvalidArgument("config line " + std::to_string(line_no) + ": empty key");
            if (!cfg.kv_.emplace(key, value).second)
                throw InvalidArgument("config: duplicate key '" + key + "'");
        }
        return cfg;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        used_.insert(key);
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    long long get_int(const std::string& key, long long fallback) const {
        used_.insert(key);
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : detail::parse_int_strict(key, it->second);
    }

    double get_double(const std::string& key, double fallback) const {
        used_.insert(key);
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : detail::parse_double_strict(key, it->second);
    }

    std::vector<double> get_double_list(const std::string& key) const {
        used_.insert(key);
        auto it = kv_.find(key);
        std::vector<double> out;
        if (it == kv_.end()) return out;
        std::string rest = it->second;
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            std::size_t comma = rest.find(',', pos);
            std::string tok = detail::trim(
                rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
            if (!tok.empty()) out.push_back(detail::parse_double_strict(key, tok));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        return out;
    }

    /// Throws if the file contained keys no reader asked about.
    void reject_unknown_keys() const {
        for (const auto& [key, value] : kv_)
            if (!used_.count(key))
                throw InvalidArgument("config: unknown key '" + key + "'");
    }

  private:
    std::map<std::string, std::string> kv_;
    mutable std::set<std::string> used_;
};

inline Scheme parse_scheme_name(const std::string& name) {
    if (name == "tnq") return Scheme::tnq;
    if (name == "tuq") return Scheme::tuq;
    if (name == "nq") return Scheme::nq;
    if (name == "uq") return Scheme::uq;
    throw InvalidArgument("unknown scheme '" + name + "' (expected tnq|tuq|nq|uq)");
}

/// Everything a train/sweep run needs: the optimizer settings plus how to
/// build the model and the data.
struct ExperimentConfig {
    TrainConfig train;
    std::string model = "logreg";  // linreg | logreg | mlp
    int hidden = 32;
    std::string dataset = "laplace";  // laplace | digits | idx
    int data_dim = 64;
    int data_n = 2048;
    int test_n = 512;
    double data_gamma = 1.0;
    std::uint64_t data_seed = 42;
    std::string idx_images, idx_labels, idx_test_images, idx_test_labels;
};

inline ExperimentConfig parse_experiment(const std::string& text) {
    ConfigMap cfg = ConfigMap::parse(text);
    ExperimentConfig ec;
    std::string scheme = cfg.get_string("scheme", "tnq");
    if (scheme == "dsgd")
        ec.train.scheme.reset();
    else
        ec.train.scheme = parse_scheme_name(scheme);
    ec.train.bits = int(cfg.get_int("bits", ec.train.bits));
    ec.train.clients = int(cfg.get_int("clients", ec.train.clients));
    ec.train.batch = int(cfg.get_int("batch", ec.train.batch));
    ec.train.lr = cfg.get_double("lr", ec.train.lr);
    ec.train.momentum = cfg.get_double("momentum", ec.train.momentum);
    ec.train.weight_decay = cfg.get_double("weight_decay", ec.train.weight_decay);
    ec.train.rounds = int(cfg.get_int("rounds", ec.train.rounds));
    ec.train.seed = std::uint64_t(cfg.get_int("seed", 1));
    ec.train.eval_every = int(cfg.get_int("eval_every", 1));
    ec.train.weights = cfg.get_double_list("weights");
    ec.model = cfg.get_string("model", ec.model);
    ec.hidden = int(cfg.get_int("hidden", ec.hidden));
    ec.dataset = cfg.get_string("dataset", ec.dataset);
    ec.data_dim = int(cfg.get_int("data_dim", ec.data_dim));
    ec.data_n = int(cfg.get_int("data_n", ec.data_n));
    ec.test_n = int(cfg.get_int("test_n", ec.test_n));
    ec.data_gamma = cfg.get_double("data_gamma", ec.data_gamma);
    ec.data_seed = std::uint64_t(cfg.get_int("data_seed", 42));
    ec.idx_images = cfg.get_string("idx_images", "");
    ec.idx_labels = cfg.get_string("idx_labels", "");
    ec.idx_test_images = cfg.get_string("idx_test_images", "");
    ec.idx_test_labels = cfg.get_string("idx_test_labels", "");
    cfg.reject_unknown_keys();
    if (ec.model != "linreg" && ec.model != "logreg" && ec.model != "mlp")
        throw InvalidArgument("config: model must be linreg|logreg|mlp, got '" + ec.model + "'");
    if (ec.dataset != "laplace" && ec.dataset != "digits" && ec.dataset != "idx")
        throw InvalidArgument("config: dataset must be laplace|digits|idx, got '" + ec.dataset +
                              "'");
    return ec;
}

struct ExperimentData {
    Dataset train;
    Dataset test;  // may be empty
};

inline ExperimentData build_datasets(const ExperimentConfig& ec) {
    ExperimentData data;
    if (ec.dataset == "laplace") {
        if (ec.data_dim < 1 || ec.data_n < 1)
            throw InvalidArgument("config: data_dim and data_n must be >= 1");
        CounterRng rng(ec.data_seed);
        SynthTask task = synth_laplace_task(std::size_t(ec.data_dim), std::size_t(ec.data_n),
                                            ec.data_gamma, rng, std::size_t(ec.test_n));
        data.train = std::move(task.train);
        data.test = std::move(task.test);
    } else if (ec.dataset == "digits") {
        if (ec.data_n < 1) throw InvalidArgument("config: data_n must be >= 1");
        CounterRng base(ec.data_seed);
        CounterRng train_rng = base.split(0);
        data.train = to_dataset(synth_digits(std::uint32_t(ec.data_n), train_rng), "synth_digits");
        if (ec.test_n > 0) {
            CounterRng test_rng = base.split(1);
            data.test =
                to_dataset(synth_digits(std::uint32_t(ec.test_n), test_rng), "synth_digits_test");
        }
    } else {
        if (ec.idx_images.empty() || ec.idx_labels.empty())
            throw InvalidArgument("config: dataset=idx needs idx_images and idx_labels");
        data.train = load_idx(ec.idx_images, ec.idx_labels);
        if (!ec.idx_test_images.empty())
            data.test = load_idx(ec.idx_test_images, ec.idx_test_labels);
    }
    return data;
}

inline ModelSpec make_model_spec(const ExperimentConfig& ec, const Dataset& train) {
    if (ec.model == "linreg") return ModelSpec::linreg(int(train.dim));
    if (train.num_classes < 2)
        throw InvalidArgument("config: classification model on a dataset without class labels");
    if (ec.model == "logreg") return ModelSpec::logreg(int(train.dim), train.num_classes);
    return ModelSpec::make_mlp(int(train.dim), ec.hidden, train.num_classes);
}

}  // namespace tnq
