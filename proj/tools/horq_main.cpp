#include <cstdint>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "horq/horq.hpp"

namespace {

void kv(const std::string& key, const std::string& value) {
  std::cout << key << '=' << value << '\n';
}

std::string num(double v) {
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

std::vector<std::size_t> parse_index_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(cell, &used);
    } catch (const std::exception&) {
      throw horq::ConfigError(std::string(what) + ": bad entry '" + cell + "'");
    }
    if (used != cell.size())
      throw horq::ConfigError(std::string(what) + ": bad entry '" + cell + "'");
    out.push_back(v);
  }
  return out;
}

struct QuantizeOpts {
  std::string input, output;
  std::size_t order = 2;
  bool report = false;
};

void run_quantize(const QuantizeOpts& o) {
  const horq::Tensor t = horq::load_tensor(o.input);
  const std::vector<float> flat(t.data().begin(), t.data().end());
  const horq::HorqCode code = horq::quantize_horq(flat, o.order);
  if (!o.output.empty()) horq::save_code(o.output, code);
  if (o.report) {
    kv("n", std::to_string(code.n));
    kv("order", std::to_string(code.order()));
    double x_norm2 = 0.0;
    for (float v : flat) x_norm2 += static_cast<double>(v) * static_cast<double>(v);
    std::vector<double> residual(flat.begin(), flat.end());
    for (std::size_t i = 0; i < code.order(); ++i) {
      const horq::ScaledPlane& term = code.terms[i];
      double r_norm2 = 0.0;
      for (std::size_t j = 0; j < code.n; ++j) {
        residual[j] -= term.plane.bit(j) ? term.beta : -static_cast<double>(term.beta);
        r_norm2 += residual[j] * residual[j];
      }
      kv("beta_" + std::to_string(i + 1), num(term.beta));
      kv("rel_residual_" + std::to_string(i + 1),
         num(x_norm2 > 0.0 ? r_norm2 / x_norm2 : 0.0));
    }
  }
}

struct ConvOpts {
  std::string input, weights, output;
  std::size_t stride = 1, pad = 0, order = 2;
  std::string mode = "horq";
  bool report = false;
};

void run_conv(const ConvOpts& o) {
  const horq::Tensor x = horq::load_tensor(o.input);
  const horq::Tensor w = horq::load_tensor(o.weights);
  const horq::Tensor y = o.mode == "float"
                             ? horq::conv_float(x, w, o.stride, o.pad)
                             : horq::conv_horq(x, w, o.stride, o.pad, o.order);
  if (!o.output.empty()) horq::save_tensor(o.output, y);
  if (o.report) {
    kv("mode", o.mode);
    if (o.mode != "float") kv("order", std::to_string(o.order));
    kv("out_channels", std::to_string(y.shape()[0]));
    kv("out_w", std::to_string(y.shape()[1]));
    kv("out_h", std::to_string(y.shape()[2]));
    const horq::Tensor ref = horq::conv_float(x, w, o.stride, o.pad);
    double diff2 = 0.0, ref2 = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const double d = static_cast<double>(y.data()[i]) - static_cast<double>(ref.data()[i]);
      diff2 += d * d;
      ref2 += static_cast<double>(ref.data()[i]) * static_cast<double>(ref.data()[i]);
    }
    kv("frobenius_error", num(std::sqrt(diff2)));
    kv("relative_error", num(ref2 > 0.0 ? std::sqrt(diff2 / ref2) : 0.0));
  }
}

struct TrainOpts {
  std::string dataset = "blobs";
  std::string arch = "fc:2-16-2";
  std::string quantize;
  std::size_t order = 2;
  std::string loss = "hinge";
  double lr = 0.1;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  std::size_t samples = 500;
  std::string metrics;
};

std::vector<horq::LayerSpec> parse_arch(const std::string& arch,
                                        const std::vector<std::size_t>& quantized,
                                        std::size_t order) {
  if (arch.rfind("fc:", 0) != 0)
    throw horq::ConfigError("--arch must look like fc:IN-H1-...-OUT");
  const std::vector<std::size_t> sizes = [&] {
    std::vector<std::size_t> out;
    std::istringstream in(arch.substr(3));
    std::string cell;
    while (std::getline(in, cell, '-')) {
      std::size_t used = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(cell, &used);
      } catch (const std::exception&) {
        throw horq::ConfigError("--arch: bad size '" + cell + "'");
      }
      if (used != cell.size() || v == 0)
        throw horq::ConfigError("--arch: bad size '" + cell + "'");
      out.push_back(v);
    }
    return out;
  }();
  if (sizes.size() < 2) throw horq::ConfigError("--arch needs at least two sizes");
  std::vector<horq::LayerSpec> specs(sizes.size() - 1);
  for (std::size_t l = 0; l < specs.size(); ++l) {
    specs[l].fan_in = sizes[l];
    specs[l].fan_out = sizes[l + 1];
    specs[l].order = order;
    // Hidden layers saturate with hard-tanh; the last layer emits raw logits.
    specs[l].activation =
        l + 1 < specs.size() ? horq::Activation::HardTanh : horq::Activation::None;
  }
  for (std::size_t idx : quantized) {
    if (idx >= specs.size())
      throw horq::ConfigError("--quantize: layer index " + std::to_string(idx) +
                              " out of range");
    specs[idx].quantized = true;
  }
  return specs;
}

void run_train(const TrainOpts& o) {
  horq::Dataset train, test;
  bool have_test = false;
  if (o.dataset == "blobs") {
    train = horq::make_blobs(o.samples, o.seed);
    test = horq::make_blobs(o.samples, o.seed + 1);
    have_test = true;
  } else if (o.dataset == "xor") {
    train = horq::make_xor(o.samples, o.seed);
    test = horq::make_xor(o.samples, o.seed + 1);
    have_test = true;
  } else if (o.dataset.rfind("csv:", 0) == 0) {
    train = horq::load_csv_dataset(o.dataset.substr(4));
  } else {
    throw horq::ConfigError("--dataset must be blobs, xor, or csv:PATH");
  }
  const horq::Standardizer stats = horq::fit_standardizer(train);
  horq::standardize(stats, train);
  if (have_test) horq::standardize(stats, test);

  horq::TrainConfig cfg;
  cfg.layers = parse_arch(o.arch, parse_index_list(o.quantize, "--quantize"), o.order);
  cfg.loss = o.loss == "softmax" ? horq::Loss::SoftmaxXent : horq::Loss::HingeL2Svm;
  cfg.lr = o.lr;
  cfg.epochs = o.epochs;
  cfg.seed = o.seed;
  horq::TrainOutcome outcome = horq::train_loop(cfg, train);
  if (!o.metrics.empty()) horq::write_metrics_csv(o.metrics, outcome.trace);

  kv("dataset", o.dataset);
  kv("arch", o.arch);
  kv("loss", o.loss);
  kv("epochs", std::to_string(o.epochs));
  kv("quantized_layers", o.quantize.empty() ? "none" : o.quantize);
  if (!o.quantize.empty()) kv("order", std::to_string(o.order));
  const horq::EpochMetrics& last = outcome.trace.back();
  kv("final_train_loss", num(last.train_loss));
  kv("final_train_acc", num(last.train_acc));
  kv("final_mean_rel_residual", num(last.mean_rel_residual));
  if (have_test) kv("test_acc", num(horq::evaluate_accuracy(outcome.net, test)));
}

struct SpeedupOpts {
  std::size_t cin = 64, cout = 256, w = 3, h = 3, kmax = 4, word_width = 64;
  std::string csv;
};

void run_speedup(const SpeedupOpts& o) {
  horq::SpeedupQuery base{o.cin, o.cout, o.w, o.h, 1, o.word_width};
  const std::vector<horq::SweepRow> rows = horq::sweep_order(base, o.kmax);
  for (const horq::SweepRow& row : rows)
    kv("speedup_" + std::to_string(row.value), num(row.eta));
  kv("reference_speedups", "58,30,20,15");
  kv("reference_note",
     "reference figures are rounded approximations for an unspecified configuration; "
     "the closed-form model above is exact for the requested dimensions");
  if (!o.csv.empty()) {
    std::ostringstream out;
    out << "order,speedup\n" << std::setprecision(10);
    for (const horq::SweepRow& row : rows) out << row.value << ',' << row.eta << '\n';
    horq::detail::spill(o.csv, out.str());
  }
}

struct StorageOpts {
  std::string layers;
  std::string binarize;
};

void run_storage(const StorageOpts& o) {
  std::vector<horq::LayerStorage> layers;
  std::istringstream in(o.layers);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    horq::LayerStorage layer;
    const std::size_t x = cell.find('x');
    try {
      std::size_t used = 0;
      if (x == std::string::npos) {
        // A bare count is one filter row holding all parameters.
        layer.rows = 1;
        layer.cols = std::stoul(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } else {
        layer.rows = std::stoul(cell.substr(0, x), &used);
        if (used != x) throw std::invalid_argument(cell);
        layer.cols = std::stoul(cell.substr(x + 1), &used);
        if (used != cell.size() - x - 1) throw std::invalid_argument(cell);
      }
    } catch (const std::exception&) {
      throw horq::ConfigError("--layers: bad entry '" + cell + "' (want N or RxC)");
    }
    layer.binarized = true;
    layers.push_back(layer);
  }
  if (layers.empty()) throw horq::ConfigError("--layers: no layers given");
  if (!o.binarize.empty()) {
    const std::vector<std::size_t> flags = parse_index_list(o.binarize, "--binarize");
    if (flags.size() != layers.size())
      throw horq::ConfigError("--binarize: need one 0/1 flag per layer");
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (flags[i] > 1) throw horq::ConfigError("--binarize: flags must be 0 or 1");
      layers[i].binarized = flags[i] == 1;
    }
  }
  const horq::StorageReport rep = horq::storage_model(layers);
  kv("float_bytes", std::to_string(rep.float_bytes));
  kv("binary_bytes", std::to_string(rep.binary_bytes));
  kv("ratio", num(rep.ratio));
}

struct BenchOpts {
  std::size_t m = 512, n = 512, k = 512, order = 1, reps = 3;
  std::uint64_t seed = 1;
  std::string csv;
};

void run_bench(const BenchOpts& o) {
  const horq::BenchResult res = horq::bench_gemm(o.m, o.n, o.k, o.order, o.reps, o.seed);
  kv("m", std::to_string(res.m));
  kv("n", std::to_string(res.n));
  kv("k", std::to_string(res.k));
  kv("order", std::to_string(res.order));
  kv("reps", std::to_string(res.reps));
  kv("float_ms", num(res.float_ms));
  kv("binary_ms", num(res.binary_ms));
  kv("quantize_ms", num(res.quantize_ms));
  kv("measured_ratio", num(res.measured_ratio));
  kv("predicted_ratio", num(res.predicted_ratio));
  if (!o.csv.empty()) {
    std::ostringstream out;
    out << "m,n,k,order,reps,float_ms,binary_ms,quantize_ms,measured_ratio,predicted_ratio\n"
        << std::setprecision(10) << res.m << ',' << res.n << ',' << res.k << ','
        << res.order << ',' << res.reps << ',' << res.float_ms << ',' << res.binary_ms
        << ',' << res.quantize_ms << ',' << res.measured_ratio << ','
        << res.predicted_ratio << '\n';
    horq::detail::spill(o.csv, out.str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-order residual quantization toolkit"};
  app.require_subcommand(1);

  QuantizeOpts q;
  CLI::App* quantize = app.add_subcommand("quantize", "Quantize a tensor to an order-K binary code");
  quantize->add_option("--input", q.input, "Input tensor file")->required();
  quantize->add_option("--order", q.order, "Quantization order K");
  quantize->add_option("--output", q.output, "Output code file");
  quantize->add_flag("--report", q.report, "Print key=value summary");
  quantize->callback([&q] { run_quantize(q); });

  ConvOpts c;
  CLI::App* conv = app.add_subcommand("conv", "Convolve a tensor with a filter bank");
  conv->add_option("--input", c.input, "Input tensor file (c_in, w, h)")->required();
  conv->add_option("--weights", c.weights, "Weight tensor file (c_out, c_in, w, h)")->required();
  conv->add_option("--stride", c.stride, "Stride");
  conv->add_option("--pad", c.pad, "Zero padding");
  conv->add_option("--order", c.order, "Quantization order K (horq mode)");
  conv->add_option("--mode", c.mode, "horq or float")
      ->check(CLI::IsMember({"horq", "float"}));
  conv->add_option("--output", c.output, "Output tensor file");
  conv->add_flag("--report", c.report, "Print error vs the float reference");
  conv->callback([&c] { run_conv(c); });

  TrainOpts t;
  CLI::App* train = app.add_subcommand("train", "Train a small network with quantized layers");
  train->add_option("--dataset", t.dataset, "blobs, xor, or csv:PATH");
  train->add_option("--arch", t.arch, "Architecture, e.g. fc:2-16-2");
  train->add_option("--quantize", t.quantize, "Comma-separated layer indices to quantize");
  train->add_option("--order", t.order, "Quantization order K");
  train->add_option("--loss", t.loss, "hinge or softmax")
      ->check(CLI::IsMember({"hinge", "softmax"}));
  train->add_option("--lr", t.lr, "Learning rate");
  train->add_option("--epochs", t.epochs, "Training epochs");
  train->add_option("--seed", t.seed, "RNG seed");
  train->add_option("--samples", t.samples, "Synthetic dataset size");
  train->add_option("--metrics", t.metrics, "Write per-epoch metrics CSV here");
  train->callback([&t] { run_train(t); });

  CLI::App* model = app.add_subcommand("model", "Analytical performance models");
  model->require_subcommand(1);
  SpeedupOpts s;
  CLI::App* speedup = model->add_subcommand("speedup", "Predicted acceleration per order");
  // Long help only: the default -h short flag would swallow the --h dimension.
  speedup->set_help_flag("--help", "Print this help message and exit");
  speedup->add_option("--cin", s.cin, "Input channels");
  speedup->add_option("--cout", s.cout, "Output channels");
  speedup->add_option("--w", s.w, "Filter width");
  speedup->add_option("--h", s.h, "Filter height");
  speedup->add_option("--kmax", s.kmax, "Sweep orders 1..kmax");
  speedup->add_option("--word-width", s.word_width, "Binary ops per word");
  speedup->add_option("--csv", s.csv, "Write the sweep as CSV here");
  speedup->callback([&s] { run_speedup(s); });

  StorageOpts st;
  CLI::App* storage = model->add_subcommand("storage", "Model size with binarized layers");
  storage->add_option("--layers", st.layers, "Comma-separated layer sizes, N or RxC")->required();
  storage->add_option("--binarize", st.binarize, "0/1 flag per layer (default: all 1)");
  storage->callback([&st] { run_storage(st); });

  CLI::App* bench = app.add_subcommand("bench", "Micro-benchmarks");
  bench->require_subcommand(1);
  BenchOpts b;
  CLI::App* bgemm = bench->add_subcommand("gemm", "Float vs packed binary product");
  bgemm->add_option("--m", b.m, "Rows of A");
  bgemm->add_option("--n", b.n, "Columns of B");
  bgemm->add_option("--k", b.k, "Inner dimension");
  bgemm->add_option("--order", b.order, "Quantization order K");
  bgemm->add_option("--reps", b.reps, "Repetitions (median reported)");
  bgemm->add_option("--seed", b.seed, "RNG seed for operand generation");
  bgemm->add_option("--csv", b.csv, "Write the measurement as CSV here");
  bgemm->callback([&b] { run_bench(b); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const horq::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const horq::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
