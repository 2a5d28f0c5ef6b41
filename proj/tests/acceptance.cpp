// Acceptance gate: one line per criterion, nonzero exit per failed criterion.
// Criterion 8 measures a property that does not hold per instance (each added
// plane contracts the operand residual, not the downstream product error), so
// its honest result is expected to be a failure with a small violation count.

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "horq/horq.hpp"

namespace fs = std::filesystem;
using namespace horq;

namespace {

int failures = 0;

void record(int id, const std::string& label, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << label;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
}

template <typename F>
void guarded(int id, const std::string& label, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    record(id, label, false, std::string("exception: ") + e.what());
  }
}

std::string num(double v) {
  std::ostringstream out;
  out << std::setprecision(8) << v;
  return out.str();
}

// ---- criteria 1 and 2: analytical speedup model ----

void criterion_speedup_anchor() {
  const double eta = speedup_ratio({64, 256, 3, 3, 2, 64});
  record(1, "speedup anchor 31.98 +- 0.01 at c_in=64 c_out=256 3x3 K=2",
         std::abs(eta - 31.98) <= 0.01, "got " + num(eta));
}

void criterion_speedup_sweep() {
  const std::vector<double> expected{63.94, 31.98, 21.32, 15.99};
  const std::vector<SweepRow> rows = sweep_order({64, 256, 3, 3, 1, 64}, 4);
  bool ok = rows.size() == expected.size();
  std::string got;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ok = ok && std::abs(rows[i].eta - expected[i]) <= 0.01;
    got += (i ? "," : "") + num(rows[i].eta);
  }

  // The command line tool must also surface the rounded reference figures.
  bool reference_printed = false;
#ifdef HORQ_CLI_PATH
  const fs::path out = fs::temp_directory_path() / "horq_acceptance_speedup.txt";
  const std::string cmd =
      std::string(HORQ_CLI_PATH) + " model speedup >" + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  if (WIFEXITED(status) && WEXITSTATUS(status) == 0) {
    std::ifstream in(out);
    std::string line;
    while (std::getline(in, line))
      if (line == "reference_speedups=58,30,20,15") reference_printed = true;
  }
#endif
  record(2, "speedup sweep K=1..4 matches [63.94, 31.98, 21.32, 15.99] +- 0.01",
         ok && reference_printed,
         "got [" + got + "], reference row printed: " + (reference_printed ? "yes" : "no"));
}

// ---- criteria 3 and 4: residual chain over a shared random corpus ----

struct ResidualStats {
  std::size_t monotone_violations = 0;
  std::size_t strict_violations = 0;
  std::size_t pythagorean_violations = 0;
  double worst_rel = 0.0;
  std::size_t vectors = 0;
};

ResidualStats residual_chain_stats() {
  ResidualStats stats;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> flat(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> len(1, 256);
  for (std::size_t trial = 0; trial < 10000; ++trial) {
    const std::size_t n = len(rng);
    std::vector<float> x(n);
    for (float& v : x)
      v = static_cast<float>(trial % 2 == 0 ? gauss(rng) : flat(rng));
    const HorqCode code = quantize_horq(x, 5);
    // The chain below replays the quantizer's float residual updates; the
    // norms are accumulated in double on top of those exact values.
    std::vector<float> residual(x.begin(), x.end());
    double prev = 0.0;
    for (float v : residual) prev += static_cast<double>(v) * static_cast<double>(v);
    for (std::size_t k = 0; k < code.order(); ++k) {
      const ScaledPlane& term = code.terms[k];
      double cur = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        residual[j] -= term.plane.bit(j) ? term.beta : -term.beta;
        cur += static_cast<double>(residual[j]) * static_cast<double>(residual[j]);
      }
      if (cur > prev) ++stats.monotone_violations;
      if (term.beta > 0.0f && cur >= prev) ++stats.strict_violations;
      const double predicted =
          prev - static_cast<double>(n) * static_cast<double>(term.beta) *
                     static_cast<double>(term.beta);
      const double err = std::abs(cur - predicted);
      const double scale = std::max(prev, 1e-12);
      stats.worst_rel = std::max(stats.worst_rel, err / scale);
      if (err > 1e-6 * scale) ++stats.pythagorean_violations;
      prev = cur;
    }
    ++stats.vectors;
  }
  return stats;
}

void criteria_residual_chain() {
  const ResidualStats stats = residual_chain_stats();
  record(3, "residual norm non-increasing over 10^4 vectors, K=1..5",
         stats.monotone_violations == 0 && stats.strict_violations == 0,
         std::to_string(stats.vectors) + " vectors, " +
             std::to_string(stats.monotone_violations) + " monotone and " +
             std::to_string(stats.strict_violations) + " strictness violations");
  record(4, "residual norm drops by n*beta^2 per term within 1e-6 relative",
         stats.pythagorean_violations == 0,
         "worst relative deviation " + num(stats.worst_rel));
}

// ---- criterion 5: the mean-magnitude scale beats a dense grid ----

void criterion_scale_optimality() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss(0.0, 1.5);
  std::uniform_int_distribution<std::size_t> len(1, 64);
  std::size_t losses = 0;
  for (std::size_t trial = 0; trial < 1000; ++trial) {
    const std::size_t n = len(rng);
    std::vector<float> x(n);
    for (float& v : x) v = static_cast<float>(gauss(rng));
    const ScaledPlane term = quantize_first_order(x);
    const auto err_at = [&](double beta) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double s = term.plane.bit(j) ? 1.0 : -1.0;
        const double d = static_cast<double>(x[j]) - beta * s;
        acc += d * d;
      }
      return acc;
    };
    double max_abs = 0.0;
    for (float v : x) max_abs = std::max(max_abs, static_cast<double>(std::abs(v)));
    const double chosen = err_at(term.beta);
    double best_grid = err_at(0.0);
    for (int i = 1; i <= 200; ++i)
      best_grid = std::min(best_grid, err_at(2.0 * max_abs * i / 200.0));
    if (chosen > best_grid + 1e-9 * std::max(1.0, best_grid)) ++losses;
  }
  record(5, "mean-magnitude scale beats a 201-point grid on 10^3 vectors", losses == 0,
         std::to_string(losses) + " grid wins");
}

// ---- criterion 6: packed dot equals the unpacked oracle ----

void criterion_bit_exact_dot() {
  std::size_t mismatches = 0;
  std::size_t checked = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    std::vector<BinaryPlane> planes;
    for (std::size_t mask = 0; mask < (1u << n); ++mask) {
      std::vector<float> v(n);
      for (std::size_t j = 0; j < n; ++j) v[j] = (mask >> j) & 1 ? 1.0f : -1.0f;
      planes.push_back(BinaryPlane::pack(v));
    }
    for (const BinaryPlane& a : planes)
      for (const BinaryPlane& b : planes) {
        float oracle = 0.0f;
        for (std::size_t j = 0; j < n; ++j) oracle += a.element(j) * b.element(j);
        if (xnor_dot(a, b) != static_cast<std::int64_t>(oracle)) ++mismatches;
        ++checked;
      }
  }
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<std::size_t> len(1, 512);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t trial = 0; trial < 10000; ++trial) {
    const std::size_t n = len(rng);
    std::vector<float> va(n), vb(n);
    for (float& v : va) v = static_cast<float>(gauss(rng));
    for (float& v : vb) v = static_cast<float>(gauss(rng));
    const BinaryPlane a = BinaryPlane::sign_of(va);
    const BinaryPlane b = BinaryPlane::sign_of(vb);
    float oracle = 0.0f;
    for (std::size_t j = 0; j < n; ++j) oracle += a.element(j) * b.element(j);
    if (xnor_dot(a, b) != static_cast<std::int64_t>(oracle)) ++mismatches;
    ++checked;
  }
  record(6, "packed dot equals the sign oracle, exhaustive n<=8 plus 10^4 random pairs",
         mismatches == 0, std::to_string(checked) + " pairs, " +
                              std::to_string(mismatches) + " mismatches");
}

// ---- criteria 7 and 8: convolution against the reconstructed oracle ----

void criteria_convolution() {
  std::mt19937_64 rng(555);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::size_t oracle_violations = 0;
  std::size_t monotone_violations = 0;
  double worst_rel = 0.0;
  std::size_t instances = 0;
  while (instances < 100) {
    std::uniform_int_distribution<std::size_t> chan(1, 4), spatial(4, 8), filt(1, 3),
        stride_pick(1, 2), pad_pick(0, 1);
    const std::size_t c_in = chan(rng), c_out = chan(rng);
    const std::size_t in_w = spatial(rng), in_h = spatial(rng);
    const std::size_t f_w = filt(rng), f_h = filt(rng);
    const std::size_t stride = stride_pick(rng), pad = pad_pick(rng);
    std::vector<float> xv(c_in * in_w * in_h), wv(c_out * c_in * f_w * f_h);
    for (float& v : xv) v = static_cast<float>(gauss(rng));
    for (float& v : wv) v = static_cast<float>(gauss(rng));
    const Tensor x({c_in, in_w, in_h}, xv);
    const Tensor w({c_out, c_in, f_w, f_h}, wv);
    std::optional<ConvGeometry> maybe;
    try {
      maybe.emplace(ConvGeometry::infer(x, w, stride, pad));
    } catch (const ShapeError&) {
      continue;  // stride does not divide this span, draw again
    }
    const ConvGeometry& geom = *maybe;
    ++instances;

    const Tensor reference = conv_float(x, w, stride, pad);
    const Matrix recon_w = reconstruct(quantize_weights(reshape_weight(w)));
    const Matrix cols = im2col(x, geom);
    double previous_error = -1.0;
    bool instance_monotone = true;
    for (std::size_t order = 1; order <= 3; ++order) {
      const Tensor fast = conv_horq(x, w, stride, pad, order);
      const Matrix recon_x = reconstruct(quantize_input(cols, order));
      const Tensor oracle = reshape_output(gemm(recon_w, recon_x), geom);
      double diff2 = 0.0, norm2 = 0.0, err2 = 0.0;
      for (std::size_t i = 0; i < fast.size(); ++i) {
        const double d =
            static_cast<double>(fast.data()[i]) - static_cast<double>(oracle.data()[i]);
        diff2 += d * d;
        norm2 += static_cast<double>(oracle.data()[i]) * static_cast<double>(oracle.data()[i]);
        const double e =
            static_cast<double>(fast.data()[i]) - static_cast<double>(reference.data()[i]);
        err2 += e * e;
      }
      const double rel = std::sqrt(diff2) / std::max(std::sqrt(norm2), 1e-9);
      worst_rel = std::max(worst_rel, rel);
      if (rel > 1e-4) ++oracle_violations;
      const double error = std::sqrt(err2);
      if (previous_error >= 0.0 && error > previous_error) instance_monotone = false;
      previous_error = error;
    }
    if (!instance_monotone) ++monotone_violations;
  }
  record(7, "binary convolution equals the reconstructed-operand oracle at 1e-4",
         oracle_violations == 0,
         "100 instances x K=1..3, worst relative deviation " + num(worst_rel));
  record(8, "float-reference conv error non-increasing K=1->2->3",
         monotone_violations == 0,
         std::to_string(monotone_violations) + "/100 instances violate");
}

// ---- criterion 9: finite differences on small float networks ----

double loss_of(const Network& net, const Matrix& x, std::span<const std::size_t> labels,
               Loss kind) {
  return compute_loss(kind, net.forward(x), labels).loss;
}

bool gradients_pass(Network& net, const Matrix& x, std::span<const std::size_t> labels,
                    Loss kind, std::size_t& params) {
  ForwardCache cache;
  const Matrix logits = net.forward(x, &cache);
  const LossValue lv = compute_loss(kind, logits, labels);
  const std::vector<LayerGrad> grads = net.backward(cache, lv.grad);
  const double h = 1e-3;
  bool ok = true;
  const auto check_one = [&](float& slot, double analytic) {
    const float keep = slot;
    slot = static_cast<float>(keep + h);
    const double up = loss_of(net, x, labels, kind);
    slot = static_cast<float>(keep - h);
    const double down = loss_of(net, x, labels, kind);
    slot = keep;
    const double fd = (up - down) / (2.0 * h);
    const double tol = 1e-3 * std::max({std::abs(fd), std::abs(analytic), 0.1});
    if (std::abs(fd - analytic) > tol) ok = false;
    ++params;
  };
  for (std::size_t l = 0; l < net.depth(); ++l) {
    for (std::size_t i = 0; i < net.weight(l).size(); ++i)
      check_one(net.weight(l).data()[i], grads[l].dw.data()[i]);
    for (std::size_t r = 0; r < net.bias(l).size(); ++r)
      check_one(net.bias(l)[r], grads[l].db[r]);
  }
  return ok;
}

void criterion_gradient_checks() {
  const std::vector<std::size_t> labels{0, 2, 1, 0};
  bool ok = true;
  std::size_t largest = 0;

  Network softmax_net({{LayerKind::FullyConnected, 2, 4, false, 1, Activation::HardTanh},
                       {LayerKind::FullyConnected, 4, 3}},
                      5);
  Matrix x1(2, 4);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss(0.0, 0.4);
  for (float& v : x1.data()) v = static_cast<float>(gauss(rng));
  std::size_t params = 0;
  ok = gradients_pass(softmax_net, x1, labels, Loss::SoftmaxXent, params) && ok;
  largest = std::max(largest, params);

  Network hinge_net({{LayerKind::FullyConnected, 2, 4, false, 1, Activation::Relu},
                     {LayerKind::FullyConnected, 4, 3}},
                    11);
  Matrix x2(2, 4);
  std::mt19937_64 rng2(38);
  std::normal_distribution<double> gauss2(0.0, 0.6);
  for (float& v : x2.data()) v = static_cast<float>(gauss2(rng2));
  params = 0;
  ok = gradients_pass(hinge_net, x2, labels, Loss::HingeL2Svm, params) && ok;
  largest = std::max(largest, params);

  record(9, "float-path gradients pass central finite differences at 1e-3",
         ok && largest <= 50,
         "two networks, largest has " + std::to_string(largest) + " parameters");
}

// ---- criterion 10: paired quantized training runs on synthetic blobs ----

void criterion_training() {
  std::size_t ordered = 0;
  double min_acc = 1.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Dataset train = make_blobs(500, seed);
    Dataset test = make_blobs(500, seed + 1);
    const Standardizer stats = fit_standardizer(train);
    standardize(stats, train);
    standardize(stats, test);
    double hinge_by_order[2] = {0.0, 0.0};
    for (std::size_t order = 1; order <= 2; ++order) {
      TrainConfig cfg;
      cfg.layers = {{LayerKind::FullyConnected, 2, 16, false, 1, Activation::HardTanh},
                    {LayerKind::FullyConnected, 16, 2, true, order}};
      cfg.loss = Loss::HingeL2Svm;
      cfg.lr = 0.1;
      cfg.epochs = 20;
      cfg.seed = seed;
      const TrainOutcome out = train_loop(cfg, train);
      hinge_by_order[order - 1] = out.trace.back().train_loss;
      if (order == 2) min_acc = std::min(min_acc, evaluate_accuracy(out.net, test));
    }
    if (hinge_by_order[1] <= hinge_by_order[0]) ++ordered;
  }
  record(10, "K=2 blobs training beats 95% test accuracy and orders hinge on >= 7/10 seeds",
         min_acc > 0.95 && ordered >= 7,
         "min test accuracy " + num(min_acc) + ", K=2 <= K=1 hinge on " +
             std::to_string(ordered) + "/10 seeds");
}

// ---- criterion 11: storage model bounds ----

void criterion_storage() {
  const std::vector<LayerStorage> layers{{256, 1152, true}};
  const double ratio = storage_model(layers).ratio;
  record(11, "fully binarized layer shrinks storage by 31x to 32x",
         ratio >= 31.0 && ratio <= 32.0, "ratio " + num(ratio));
}

// ---- criterion 12: wall-clock sanity of the packed kernel ----

void criterion_benchmark() {
  const BenchResult res = bench_gemm(4096, 4096, 4096, 1, 1, 1);
  const fs::path csv = fs::temp_directory_path() / "horq_acceptance_bench.csv";
  std::ofstream out(csv);
  out << "m,n,k,order,reps,float_ms,binary_ms,quantize_ms,measured_ratio,predicted_ratio\n"
      << std::setprecision(10) << res.m << ',' << res.n << ',' << res.k << ','
      << res.order << ',' << res.reps << ',' << res.float_ms << ',' << res.binary_ms
      << ',' << res.quantize_ms << ',' << res.measured_ratio << ','
      << res.predicted_ratio << '\n';
  record(12, "4096^3 packed product beats the float baseline, measurement on disk",
         res.measured_ratio > 1.0 && out.good(),
         "measured " + num(res.measured_ratio) + "x (float " + num(res.float_ms) +
             " ms, binary " + num(res.binary_ms) + " ms), csv " + csv.string());
}

}  // namespace

int main() {
  guarded(1, "speedup anchor", criterion_speedup_anchor);
  guarded(2, "speedup sweep", criterion_speedup_sweep);
  guarded(3, "residual chain", criteria_residual_chain);
  guarded(5, "scale optimality", criterion_scale_optimality);
  guarded(6, "bit-exact dot", criterion_bit_exact_dot);
  guarded(7, "convolution oracle", criteria_convolution);
  guarded(9, "gradient checks", criterion_gradient_checks);
  guarded(10, "desk-scale training", criterion_training);
  guarded(11, "storage model", criterion_storage);
  guarded(12, "benchmark sanity", criterion_benchmark);
  std::cout << "acceptance: " << (12 - failures) << "/12 criteria passed" << std::endl;
  return failures;
}
