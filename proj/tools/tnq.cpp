// tnq: gradient-compression toolkit and distributed-SGD simulator CLI.
//
// Subcommands: analyze, quantize, inspect, train, sweep.
// Exit codes: 0 success, 2 usage/invalid arguments, 3 I/O or format errors,
// 4 numerical failures (including training divergence).

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "tnq/analysis.hpp"
#include "tnq/codec.hpp"
#include "tnq/config.hpp"
#include "tnq/data.hpp"
#include "tnq/error.hpp"
#include "tnq/laplace.hpp"
#include "tnq/model.hpp"
#include "tnq/schemes.hpp"
#include "tnq/simtrain.hpp"

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw tnq::FormatError(path + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw tnq::FormatError(path + ": cannot open for writing");
    out << content;
    if (!out) throw tnq::FormatError(path + ": write failed");
}

std::vector<int> parse_bits_list(const std::string& text) {
    std::vector<int> bits;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        int b = int(tnq::detail::parse_int_strict("bits", tok));
        if (b < 1 || b > 8) throw tnq::InvalidArgument("bit budget must be in [1, 8]");
        bits.push_back(b);
    }
    if (bits.empty()) throw tnq::InvalidArgument("empty bits list");
    return bits;
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

int thread_budget(std::size_t cells) {
    unsigned hw = std::thread::hardware_concurrency();
    long long n = hw ? hw : 1;
    if (const char* env = std::getenv("TNQ_THREADS")) {
        n = tnq::detail::parse_int_strict("TNQ_THREADS", env);
        if (n < 1) throw tnq::InvalidArgument("TNQ_THREADS must be >= 1");
    }
    return int(std::min<long long>(n, std::max<std::size_t>(cells, 1)));
}

// ---- analyze ----------------------------------------------------------

std::string analyze_csv(double gamma, long long dim, int clients,
                        const std::vector<int>& bits_list) {
    if (!(gamma > 0.0)) throw tnq::InvalidArgument("gamma must be positive");
    if (dim < 1) throw tnq::InvalidArgument("dim must be >= 1");
    if (clients < 1) throw tnq::InvalidArgument("clients must be >= 1");
    tnq::LaplaceModel model(gamma);
    double norm = double(dim) * gamma * gamma / clients;
    std::string out = "scheme,b,s,alpha,variance,bias,total,normalized_total\n";
    for (int b : bits_list) {
        int s = (1 << b) - 1;
        auto row = [&](const char* name, double alpha, double variance, double bias) {
            double total = variance + bias;
            out += std::string(name) + ',' + std::to_string(b) + ',' + std::to_string(s) + ',' +
                   fmt(alpha) + ',' + fmt(variance) + ',' + fmt(bias) + ',' + fmt(total) + ',' +
                   fmt(total / norm) + '\n';
        };
        double a_tnq = tnq::optimal_alpha_tnq(s, model);
        auto tnq_bd = tnq::error_tnq_laplace_breakdown(a_tnq, s, gamma, int(dim), clients);
        row("tnq", a_tnq, tnq_bd.variance_term, tnq_bd.bias_term);
        double a_tuq = tnq::optimal_alpha_tuq(s, model);
        auto tuq_bd = tnq::error_tuq(a_tuq, s, gamma, int(dim), clients);
        row("tuq", a_tuq, tuq_bd.variance_term, tuq_bd.bias_term);
        // Untruncated schemes quantize the whole sup-norm range 2*gamma*ln(2d).
        double a_full = 2.0 * gamma * std::log(2.0 * double(dim));
        row("nq", a_full, tnq::error_nq(s, gamma, int(dim), clients), 0.0);
        row("uq", a_full, tnq::error_uq(s, gamma, int(dim), clients), 0.0);
    }
    return out;
}

// ---- quantize / inspect ------------------------------------------------

tnq::GradientVector read_vector_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tnq::FormatError(path + ": cannot open");
    tnq::GradientVector g;
    double v;
    while (in >> v) g.push_back(v);
    if (!in.eof()) throw tnq::FormatError(path + ": not a whitespace-separated number list");
    if (g.empty()) throw tnq::FormatError(path + ": no values found");
    return g;
}

int cmd_quantize(const std::string& input, const std::string& output,
                 const std::string& scheme_name, int bits, std::uint64_t seed) {
    tnq::GradientVector g = read_vector_text(input);
    tnq::Scheme scheme = tnq::parse_scheme_name(scheme_name);
    tnq::CounterRng rng(seed);
    tnq::EncodedGradient enc = tnq::compress(g, scheme, bits, rng);
    auto bytes = tnq::to_bytes(enc);
    std::ofstream out(output, std::ios::binary);
    if (!out) throw tnq::FormatError(output + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw tnq::FormatError(output + ": write failed");
    std::cout << "wrote " << output << ": scheme=" << tnq::scheme_name(enc.scheme)
              << " bits=" << enc.bits << " dim=" << enc.dim << " gamma=" << fmt(enc.gamma)
              << " alpha=" << fmt(enc.alpha) << " bytes=" << bytes.size() << "\n";
    return 0;
}

int cmd_inspect(const std::string& input) {
    std::string raw = read_file(input);
    tnq::EncodedGradient e = tnq::from_bytes(
        std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(raw.data()),
                                      raw.size()));
    std::cout << "scheme=" << tnq::scheme_name(e.scheme) << "\n"
              << "bits=" << e.bits << "\n"
              << "levels=" << e.levels() << "\n"
              << "alpha=" << fmt(e.alpha) << "\n"
              << "gamma=" << fmt(e.gamma) << "\n"
              << "dim=" << e.dim << "\n"
              << "payload_bytes=" << e.payload.size() << "\n"
              << "wire_bits=" << e.wire_bits() << "\n";
    std::vector<std::uint64_t> hist(std::size_t(e.levels()) + 1, 0);
    if (e.alpha != 0.0) {
        auto idx = tnq::unpack_indices(e.payload, e.dim, e.bits);
        for (int i : idx) {
            if (i > e.levels())
                throw tnq::FormatError("corrupt index " + std::to_string(i) + " in payload");
            ++hist[std::size_t(i)];
        }
    } else {
        hist.assign(1, e.dim);  // degenerate all-zero marker
    }
    std::cout << "index_histogram=";
    for (std::size_t i = 0; i < hist.size(); ++i)
        std::cout << (i ? "," : "") << hist[i];
    std::cout << "\n";
    tnq::GradientVector decoded = tnq::decompress(e);
    double mean = 0.0, mean_abs = 0.0;
    for (double v : decoded) {
        mean += v;
        mean_abs += std::abs(v);
    }
    mean /= double(decoded.size());
    mean_abs /= double(decoded.size());
    std::cout << "decoded_mean=" << fmt(mean) << "\n"
              << "decoded_mean_abs=" << fmt(mean_abs) << "\n";
    return 0;
}

// ---- train / sweep ------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& out_metrics,
              const std::string& out_gamma) {
    tnq::ExperimentConfig ec = tnq::parse_experiment(read_file(config_path));
    tnq::ExperimentData data = tnq::build_datasets(ec);
    tnq::ModelSpec spec = tnq::make_model_spec(ec, data.train);
    tnq::RunMetrics metrics = tnq::run(ec.train, spec, data.train, data.test);
    write_file(out_metrics, tnq::metrics_csv(metrics));
    write_file(out_gamma, tnq::gamma_csv(metrics));
    std::cout << "final_loss=" << fmt(metrics.final_loss)
              << " final_test_acc=" << fmt(metrics.final_test_acc)
              << " total_bits=" << metrics.total_bits << " rounds=" << ec.train.rounds << "\n";
    return 0;
}

struct SweepCell {
    std::string scheme;  // "dsgd" or scheme name
    int bits;            // 32 for dsgd
    std::uint64_t seed;
};

int cmd_sweep(const std::string& config_path, const std::string& bits_text,
              const std::string& schemes_text, int seeds, const std::string& out_path) {
    if (seeds < 1) throw tnq::InvalidArgument("--seeds must be >= 1");
    tnq::ExperimentConfig ec = tnq::parse_experiment(read_file(config_path));
    std::vector<int> bits_list = parse_bits_list(bits_text);
    std::vector<std::string> schemes = split_csv(schemes_text);
    if (schemes.empty()) throw tnq::InvalidArgument("empty scheme list");
    for (const auto& s : schemes)
        if (s != "dsgd") tnq::parse_scheme_name(s);  // validate before any work

    tnq::ExperimentData data = tnq::build_datasets(ec);
    tnq::ModelSpec spec = tnq::make_model_spec(ec, data.train);

    std::vector<SweepCell> cells;
    for (const auto& s : schemes) {
        std::vector<int> cell_bits = s == "dsgd" ? std::vector<int>{32} : bits_list;
        for (int b : cell_bits)
            for (int r = 0; r < seeds; ++r)
                cells.push_back({s, b, ec.train.seed + std::uint64_t(r)});
    }

    struct CellResult {
        double loss = 0.0, acc = 0.0;
        std::uint64_t bits = 0;
        std::string error;
    };
    std::vector<CellResult> results(cells.size());
    std::atomic<std::size_t> next{0};
    int workers = thread_budget(cells.size());
    auto work = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            tnq::TrainConfig tc = ec.train;
            tc.seed = cells[i].seed;
            if (cells[i].scheme == "dsgd") {
                tc.scheme.reset();
            } else {
                tc.scheme = tnq::parse_scheme_name(cells[i].scheme);
                tc.bits = cells[i].bits;
            }
            try {
                tnq::RunMetrics m = tnq::run(tc, spec, data.train, data.test);
                results[i] = {m.final_loss, m.final_test_acc, m.total_bits, ""};
            } catch (const tnq::Error& e) {
                results[i] = {0.0, 0.0, 0, e.what()};
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    for (std::size_t i = 0; i < cells.size(); ++i)
        if (!results[i].error.empty())
            throw tnq::NumericalError("sweep cell scheme=" + cells[i].scheme + " bits=" +
                                      std::to_string(cells[i].bits) + " seed=" +
                                      std::to_string(cells[i].seed) + ": " + results[i].error);

    std::string out = "scheme,bits,seed,final_loss,final_test_acc,total_bits\n";
    std::size_t i = 0;
    for (const auto& s : schemes) {
        std::vector<int> cell_bits = s == "dsgd" ? std::vector<int>{32} : bits_list;
        for (int b : cell_bits) {
            double loss_sum = 0.0, acc_sum = 0.0, loss_sq = 0.0, acc_sq = 0.0;
            double bits_sum = 0.0;
            std::size_t first = i;
            for (int r = 0; r < seeds; ++r, ++i) {
                const auto& res = results[i];
                out += s + ',' + std::to_string(b) + ',' + std::to_string(cells[i].seed) + ',' +
                       fmt(res.loss) + ',' + fmt(res.acc) + ',' + std::to_string(res.bits) + '\n';
                loss_sum += res.loss;
                acc_sum += res.acc;
                bits_sum += double(res.bits);
            }
            double n = double(seeds);
            double loss_mean = loss_sum / n, acc_mean = acc_sum / n;
            for (std::size_t j = first; j < first + std::size_t(seeds); ++j) {
                loss_sq += (results[j].loss - loss_mean) * (results[j].loss - loss_mean);
                acc_sq += (results[j].acc - acc_mean) * (results[j].acc - acc_mean);
            }
            double denom = seeds > 1 ? n - 1.0 : 1.0;
            out += s + ',' + std::to_string(b) + ",mean," + fmt(loss_mean) + ',' + fmt(acc_mean) +
                   ',' + fmt(bits_sum / n) + '\n';
            out += s + ',' + std::to_string(b) + ",stddev," + fmt(std::sqrt(loss_sq / denom)) +
                   ',' + fmt(std::sqrt(acc_sq / denom)) + ",0\n";
        }
    }
    write_file(out_path, out);
    std::cout << "wrote " << out_path << ": " << cells.size() << " runs, " << workers
              << " worker(s)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gradient quantization toolkit and distributed-SGD simulator"};
    app.require_subcommand(1);

    auto* analyze = app.add_subcommand("analyze", "emit the scheme-error table as CSV");
    double gamma = 1.0;
    long long dim = 500000;
    int clients = 1;
    std::string bits_text = "2,3,4";
    std::string analyze_out;
    analyze->add_option("--gamma", gamma, "Laplace scale");
    analyze->add_option("--dim", dim, "gradient dimension d");
    analyze->add_option("--clients", clients, "client count N");
    analyze->add_option("--bits-list", bits_text, "comma-separated bit budgets");
    analyze->add_option("--out", analyze_out, "output CSV path (default stdout)");

    auto* quantize = app.add_subcommand("quantize", "compress a text vector into a TNQ1 file");
    std::string q_in, q_out, q_scheme = "tnq";
    int q_bits = 3;
    std::uint64_t q_seed = 1;
    quantize->add_option("--input", q_in, "text file of numbers")->required();
    quantize->add_option("--output", q_out, "TNQ1 output path")->required();
    quantize->add_option("--scheme", q_scheme, "tnq|tuq|nq|uq");
    quantize->add_option("--bits", q_bits, "bit budget in [1,8]");
    quantize->add_option("--seed", q_seed, "stochastic rounding seed");

    auto* inspect = app.add_subcommand("inspect", "print a TNQ1 file's header and stats");
    std::string i_in;
    inspect->add_option("--input", i_in, "TNQ1 file")->required();

    auto* train = app.add_subcommand("train", "run one simulated training experiment");
    std::string t_config, t_metrics = "train_metrics.csv", t_gamma = "train_gamma.csv";
    train->add_option("--config", t_config, "key=value config file")->required();
    train->add_option("--out-metrics", t_metrics, "metrics CSV path");
    train->add_option("--out-gamma", t_gamma, "per-layer gamma CSV path");

    auto* sweep = app.add_subcommand("sweep", "bits x scheme x seed tradeoff grid");
    std::string s_config, s_bits = "2,3,4", s_schemes = "tnq,tuq,nq,uq,dsgd",
                s_out = "sweep.csv";
    int s_seeds = 10;
    sweep->add_option("--config", s_config, "key=value config file")->required();
    sweep->add_option("--bits", s_bits, "comma-separated bit budgets");
    sweep->add_option("--schemes", s_schemes, "comma-separated schemes (dsgd allowed)");
    sweep->add_option("--seeds", s_seeds, "seeds per cell");
    sweep->add_option("--out", s_out, "output CSV path");

    try {
        app.parse(argc, argv);
        if (*analyze) {
            std::string csv = analyze_csv(gamma, dim, clients, parse_bits_list(bits_text));
            if (analyze_out.empty())
                std::cout << csv;
            else
                write_file(analyze_out, csv);
            return 0;
        }
        if (*quantize) return cmd_quantize(q_in, q_out, q_scheme, q_bits, q_seed);
        if (*inspect) return cmd_inspect(i_in);
        if (*train) return cmd_train(t_config, t_metrics, t_gamma);
        if (*sweep) return cmd_sweep(s_config, s_bits, s_schemes, s_seeds, s_out);
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const tnq::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const tnq::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const tnq::ProtocolError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const tnq::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
