#include "flab/tinynet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace flab {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Cross-entropy written on the logit so huge |z| cannot overflow: for
// y in {0,1}, -log p(y) == softplus(z) - y*z.
double bce_from_logit(double logit, double y) { return softplus(logit) - y * logit; }

// Per-sample activation buffers, reused across samples.
struct Workspace {
  std::vector<std::vector<double>> a;      // activations, a[0] = input
  std::vector<std::vector<double>> z;      // preactivations per layer
  std::vector<std::vector<double>> delta;  // dLoss/dz per layer

  explicit Workspace(const Architecture& arch) {
    const int layers = arch.layer_count();
    a.resize(layers + 1);
    z.resize(layers);
    delta.resize(layers);
    for (int l = 0; l <= layers; ++l) a[l].resize(arch.widths[l]);
    for (int l = 0; l < layers; ++l) {
      z[l].resize(arch.widths[l + 1]);
      delta[l].resize(arch.widths[l + 1]);
    }
  }
};

// Forward pass for one sample; fills ws.a / ws.z and returns the output logit.
double forward_logit(const ModelParams& p, const double* input, Workspace& ws) {
  const int layers = p.arch.layer_count();
  for (int i = 0; i < p.arch.widths[0]; ++i) ws.a[0][i] = input[i];
  for (int l = 0; l < layers; ++l) {
    const int nin = p.arch.widths[l];
    const int nout = p.arch.widths[l + 1];
    const double* w = p.weights[l].data();
    const double* b = p.biases[l].data();
    const double* in = ws.a[l].data();
    double* z = ws.z[l].data();
    double* out = ws.a[l + 1].data();
    for (int o = 0; o < nout; ++o) {
      double s = b[o];
      const double* row = w + static_cast<std::size_t>(o) * nin;
      for (int i = 0; i < nin; ++i) s += row[i] * in[i];
      z[o] = s;
      out[o] = (l + 1 < layers && s < 0.0) ? 0.0 : s;  // ReLU on hidden layers only
    }
  }
  return ws.z[layers - 1][0];
}

// Accumulate one sample's gradient contribution given dLoss/dlogit.
void backward_accumulate(const ModelParams& p, double dlogit, Workspace& ws, Gradients& g) {
  const int layers = p.arch.layer_count();
  ws.delta[layers - 1][0] = dlogit;
  for (int l = layers - 1; l >= 0; --l) {
    const int nin = p.arch.widths[l];
    const int nout = p.arch.widths[l + 1];
    const double* in = ws.a[l].data();
    const double* d = ws.delta[l].data();
    double* gw = g.weights[l].data();
    double* gb = g.biases[l].data();
    for (int o = 0; o < nout; ++o) {
      const double dv = d[o];
      gb[o] += dv;
      double* grow = gw + static_cast<std::size_t>(o) * nin;
      for (int i = 0; i < nin; ++i) grow[i] += dv * in[i];
    }
    if (l > 0) {
      const double* w = p.weights[l].data();
      const double* zprev = ws.z[l - 1].data();
      double* dprev = ws.delta[l - 1].data();
      for (int i = 0; i < nin; ++i) {
        double s = 0.0;
        for (int o = 0; o < nout; ++o) s += w[static_cast<std::size_t>(o) * nin + i] * d[o];
        dprev[i] = zprev[i] > 0.0 ? s : 0.0;  // ReLU subgradient, 0 at the kink
      }
    }
  }
}

Gradients zeros_like(const ModelParams& p) {
  Gradients g;
  g.weights.reserve(p.weights.size());
  g.biases.reserve(p.biases.size());
  for (const auto& w : p.weights) g.weights.emplace_back(w.size(), 0.0);
  for (const auto& b : p.biases) g.biases.emplace_back(b.size(), 0.0);
  return g;
}

void require_finite_features(const Vec2& f) {
  if (!std::isfinite(f.x) || !std::isfinite(f.y))
    throw std::invalid_argument("features must be finite");
}

double l1_norm_weights(const ModelParams& p) {
  double s = 0.0;
  for (const auto& layer : p.weights)
    for (double w : layer) s += std::abs(w);
  return s;
}

}  // namespace

void Architecture::validate() const {
  if (widths.size() < 3) throw std::invalid_argument("architecture needs at least one hidden layer");
  if (widths.front() != 2) throw std::invalid_argument("input width must be 2");
  if (widths.back() != 1) throw std::invalid_argument("output width must be 1");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("layer widths must be >= 1");
}

void Hyperparams::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("learning_rate must be positive and finite");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw std::invalid_argument("momentum must be in [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(l1_lambda >= 0.0) || !std::isfinite(l1_lambda))
    throw std::invalid_argument("l1_lambda must be >= 0 and finite");
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  p.provenance.seed = seed;
  Rng rng(seed);
  const int layers = arch.layer_count();
  p.weights.resize(layers);
  p.biases.resize(layers);
  for (int l = 0; l < layers; ++l) {
    const int nin = arch.widths[l];
    const int nout = arch.widths[l + 1];
    const double stddev = std::sqrt(2.0 / static_cast<double>(nin));
    p.weights[l].resize(static_cast<std::size_t>(nout) * nin);
    for (double& w : p.weights[l]) w = stddev * rng.next_gaussian();
    p.biases[l].assign(nout, 0.0);
  }
  return p;
}

double forward(const ModelParams& params, const Vec2& features) {
  require_finite_features(features);
  Workspace ws(params.arch);
  const double input[2] = {features.x, features.y};
  const double p = sigmoid(forward_logit(params, input, ws));
  // Keep the result strictly inside (0, 1) even when the logit saturates.
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::min(hi, std::max(lo, p));
}

std::vector<double> forward_batch(const ModelParams& params, std::span<const DataRow> rows) {
  Workspace ws(params.arch);
  std::vector<double> probs;
  probs.reserve(rows.size());
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  for (const DataRow& row : rows) {
    require_finite_features(row.features);
    const double input[2] = {row.features.x, row.features.y};
    const double p = sigmoid(forward_logit(params, input, ws));
    probs.push_back(std::min(hi, std::max(lo, p)));
  }
  return probs;
}

std::vector<Label> predict_labels(const ModelParams& params, const Dataset& data) {
  std::vector<Label> out;
  out.reserve(data.rows.size());
  for (double p : forward_batch(params, data.rows)) out.push_back(decide(p));
  return out;
}

double loss(const ModelParams& params, std::span<const DataRow> batch, double l1_lambda) {
  if (batch.empty()) throw std::invalid_argument("loss of an empty batch is undefined");
  if (!(l1_lambda >= 0.0)) throw std::invalid_argument("l1_lambda must be >= 0");
  Workspace ws(params.arch);
  double sum = 0.0;
  for (const DataRow& row : batch) {
    const double input[2] = {row.features.x, row.features.y};
    const double logit = forward_logit(params, input, ws);
    sum += bce_from_logit(logit, static_cast<double>(row.observed_label));
  }
  return sum / static_cast<double>(batch.size()) + l1_lambda * l1_norm_weights(params);
}

Gradients backward(const ModelParams& params, std::span<const DataRow> batch, double l1_lambda) {
  if (batch.empty()) throw std::invalid_argument("gradient of an empty batch is undefined");
  if (!(l1_lambda >= 0.0)) throw std::invalid_argument("l1_lambda must be >= 0");
  Workspace ws(params.arch);
  Gradients g = zeros_like(params);
  for (const DataRow& row : batch) {
    const double input[2] = {row.features.x, row.features.y};
    const double logit = forward_logit(params, input, ws);
    const double dlogit = sigmoid(logit) - static_cast<double>(row.observed_label);
    backward_accumulate(params, dlogit, ws, g);
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (auto& layer : g.weights)
    for (double& v : layer) v *= inv_b;
  for (auto& layer : g.biases)
    for (double& v : layer) v *= inv_b;
  if (l1_lambda > 0.0) {
    for (std::size_t l = 0; l < g.weights.size(); ++l)
      for (std::size_t i = 0; i < g.weights[l].size(); ++i) {
        const double w = params.weights[l][i];
        if (w > 0.0)
          g.weights[l][i] += l1_lambda;
        else if (w < 0.0)
          g.weights[l][i] -= l1_lambda;  // sign(0) contributes nothing
      }
  }
  return g;
}

ModelParams train(const Dataset& train_set, const Architecture& arch, const Hyperparams& hyper,
                  std::uint64_t seed) {
  arch.validate();
  hyper.validate();
  if (train_set.rows.empty()) throw std::invalid_argument("training set is empty");

  ModelParams params = init_params(arch, derive_seed(seed, {"init"}));
  params.provenance.seed = seed;
  Rng shuffle_rng(derive_seed(seed, {"shuffle"}));

  const std::size_t n = train_set.rows.size();
  std::vector<double> features(n * 2);
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    require_finite_features(train_set.rows[i].features);
    features[2 * i] = train_set.rows[i].features.x;
    features[2 * i + 1] = train_set.rows[i].features.y;
    targets[i] = static_cast<double>(train_set.rows[i].observed_label);
  }

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);

  Workspace ws(arch);
  Gradients grads = zeros_like(params);
  Gradients velocity = zeros_like(params);
  const int batch_size = hyper.batch_size;
  const double lambda = hyper.l1_lambda;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t stop = std::min(n, start + batch_size);
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      for (auto& layer : grads.weights) std::fill(layer.begin(), layer.end(), 0.0);
      for (auto& layer : grads.biases) std::fill(layer.begin(), layer.end(), 0.0);
      for (std::size_t s = start; s < stop; ++s) {
        const std::uint32_t idx = order[s];
        const double logit = forward_logit(params, &features[2 * idx], ws);
        const double y = targets[idx];
        loss_sum += bce_from_logit(logit, y);
        backward_accumulate(params, sigmoid(logit) - y, ws, grads);
      }
      // Momentum update on the batch-mean gradient plus the L1 subgradient.
      for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        double* g = grads.weights[l].data();
        double* v = velocity.weights[l].data();
        double* w = params.weights[l].data();
        const std::size_t count = grads.weights[l].size();
        for (std::size_t i = 0; i < count; ++i) {
          double gi = g[i] * inv_b;
          if (lambda > 0.0 && w[i] != 0.0) gi += w[i] > 0.0 ? lambda : -lambda;
          v[i] = hyper.momentum * v[i] - hyper.learning_rate * gi;
          w[i] += v[i];
        }
      }
      for (std::size_t l = 0; l < grads.biases.size(); ++l) {
        double* g = grads.biases[l].data();
        double* v = velocity.biases[l].data();
        double* b = params.biases[l].data();
        const std::size_t count = grads.biases[l].size();
        for (std::size_t i = 0; i < count; ++i) {
          v[i] = hyper.momentum * v[i] - hyper.learning_rate * (g[i] * inv_b);
          b[i] += v[i];
        }
      }
    }
    const double epoch_loss =
        loss_sum / static_cast<double>(n) + lambda * l1_norm_weights(params);
    // The loss is evaluated in logit space, so a runaway optimizer yields
    // huge finite values (mean loss ~ mean |logit|) long before anything
    // overflows. Chance level is ln 2 and healthy runs stay in single
    // digits, so a mean above 1e3 is unambiguous divergence.
    if (!std::isfinite(epoch_loss) || epoch_loss > 1e3) {
      char detail[64];
      std::snprintf(detail, sizeof detail, "training diverged (mean loss %.3g)", epoch_loss);
      throw TrainingError(detail, epoch);
    }
  }
  return params;
}

void save_params(const ModelParams& params, std::ostream& out) {
  out << "flab-model v1\n";
  out << "widths";
  for (int w : params.arch.widths) out << ' ' << w;
  out << '\n';
  out << "provenance fold=" << params.provenance.fold << " model=" << params.provenance.model_index
      << " seed=" << params.provenance.seed << " scenario=" << params.provenance.scenario_id
      << '\n';
  char buf[40];
  const auto write_row = [&](const char* tag, int index, const std::vector<double>& values) {
    out << tag << index;
    for (double v : values) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      out << buf;
    }
    out << '\n';
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    write_row("W", static_cast<int>(l), params.weights[l]);
    write_row("b", static_cast<int>(l), params.biases[l]);
  }
  out << "end\n";
}

namespace {

std::string next_line(std::istream& in, std::size_t& line_no) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("unexpected end of model file", line_no + 1);
  ++line_no;
  return line;
}

std::vector<double> parse_values(const std::string& line, const std::string& tag,
                                 std::size_t expected, std::size_t line_no) {
  std::istringstream ss(line);
  std::string head;
  ss >> head;
  if (head != tag)
    throw ParseError("expected '" + tag + "' row, got '" + head + "'", line_no);
  std::vector<double> values(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    if (!(ss >> values[i]))
      throw ParseError(tag + " row needs " + std::to_string(expected) + " values", line_no);
    if (!std::isfinite(values[i]))
      throw ParseError("non-finite parameter in " + tag + " row", line_no);
  }
  double extra;
  if (ss >> extra)
    throw ParseError(tag + " row has more than " + std::to_string(expected) + " values",
                     line_no);
  return values;
}

}  // namespace

ModelParams load_params(std::istream& in) {
  std::size_t line_no = 0;
  const std::string header = next_line(in, line_no);
  if (header != "flab-model v1") {
    if (header.rfind("flab-model", 0) == 0)
      throw ParseError("unsupported model format version '" + header + "'", line_no);
    throw ParseError("not a flab model file", line_no);
  }

  ModelParams p;
  {
    const std::string line = next_line(in, line_no);
    std::istringstream ss(line);
    std::string head;
    ss >> head;
    if (head != "widths") throw ParseError("expected widths line", line_no);
    int w;
    std::vector<int> widths;
    while (ss >> w) widths.push_back(w);
    p.arch.widths = widths;
    try {
      p.arch.validate();
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string("bad architecture: ") + e.what(), line_no);
    }
  }
  {
    const std::string line = next_line(in, line_no);
    if (line.rfind("provenance ", 0) != 0) throw ParseError("expected provenance line", line_no);
    std::istringstream ss(line.substr(11));
    std::string token;
    while (ss >> token) {
      if (token.rfind("fold=", 0) == 0)
        p.provenance.fold = std::stoi(token.substr(5));
      else if (token.rfind("model=", 0) == 0)
        p.provenance.model_index = std::stoi(token.substr(6));
      else if (token.rfind("seed=", 0) == 0)
        p.provenance.seed = std::stoull(token.substr(5));
      else if (token.rfind("scenario=", 0) == 0) {
        // Scenario id is free text and runs to the end of the line.
        const auto pos = line.find("scenario=");
        p.provenance.scenario_id = line.substr(pos + 9);
        break;
      } else {
        throw ParseError("unknown provenance field '" + token + "'", line_no);
      }
    }
  }
  const int layers = p.arch.layer_count();
  p.weights.resize(layers);
  p.biases.resize(layers);
  for (int l = 0; l < layers; ++l) {
    const auto nin = static_cast<std::size_t>(p.arch.widths[l]);
    const auto nout = static_cast<std::size_t>(p.arch.widths[l + 1]);
    p.weights[l] = parse_values(next_line(in, line_no), "W" + std::to_string(l), nin * nout, line_no);
    p.biases[l] = parse_values(next_line(in, line_no), "b" + std::to_string(l), nout, line_no);
  }
  if (next_line(in, line_no) != "end") throw ParseError("expected end marker", line_no);
  return p;
}

void save_params_file(const ModelParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_params(params, out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

ModelParams load_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_params(in);
}

namespace {

// A finite-difference probe at step h is only trustworthy when no ReLU input
// sits within the perturbation's reach of zero (and, with L1, no weight does):
// crossing a kink makes the quotient measure the wrong one-sided slope. The
// margins below are generous multiples of the worst-case activation shift.
bool fd_probe_is_safe(const ModelParams& p, const Dataset& batch, double l1_lambda, double h) {
  Workspace ws(p.arch);
  const int hidden_layers = p.arch.layer_count() - 1;
  for (const DataRow& row : batch.rows) {
    const double input[2] = {row.features.x, row.features.y};
    forward_logit(p, input, ws);
    for (int l = 0; l < hidden_layers; ++l)
      for (double z : ws.z[l])
        if (std::abs(z) < 50.0 * h) return false;
  }
  if (l1_lambda > 0.0) {
    for (const auto& layer : p.weights)
      for (double w : layer)
        if (std::abs(w) < 8.0 * h) return false;
  }
  return true;
}

}  // namespace

GradCheckReport check_gradients(int n_draws, std::uint64_t seed) {
  if (n_draws < 1) throw std::invalid_argument("n_draws must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckReport report;
  const Architecture arch;
  const double h = 1e-5;
  const double lambdas[] = {0.0, 1e-3, 1e-2, 1e-1};
  Rng rng(seed);

  while (report.draws_accepted < n_draws) {
    ModelParams p = init_params(arch, rng.next_u64());
    const double scale = 0.5 + rng.next_unit();
    for (auto& layer : p.weights)
      for (double& w : layer) w *= scale;
    for (auto& layer : p.biases)
      for (double& b : layer) b = 0.2 * rng.next_gaussian();

    Dataset batch;
    batch.split = Split::Train;
    for (int i = 0; i < 24; ++i) {
      DataRow row;
      row.features.x = 0.6 * rng.next_gaussian();
      row.features.y = 0.6 * rng.next_gaussian();
      row.group = (i % 2 == 0) ? Group::M : Group::F;
      row.clean_label = static_cast<Label>(rng.next_below(2));
      row.observed_label = row.clean_label;
      batch.rows.push_back(row);
    }
    const double lambda = lambdas[report.draws_accepted % 4];

    if (!fd_probe_is_safe(p, batch, lambda, h)) {
      ++report.draws_rejected;
      continue;
    }

    const Gradients analytic = backward(p, batch.rows, lambda);
    ModelParams probe = p;
    const auto check_coord = [&](double& slot, double expected) {
      const double original = slot;
      slot = original + h;
      const double up = loss(probe, batch.rows, lambda);
      slot = original - h;
      const double down = loss(probe, batch.rows, lambda);
      slot = original;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(expected), 1e-6});
      report.max_rel_err = std::max(report.max_rel_err, std::abs(fd - expected) / denom);
      ++report.coords_checked;
    };
    for (std::size_t l = 0; l < probe.weights.size(); ++l)
      for (std::size_t i = 0; i < probe.weights[l].size(); ++i)
        check_coord(probe.weights[l][i], analytic.weights[l][i]);
    for (std::size_t l = 0; l < probe.biases.size(); ++l)
      for (std::size_t i = 0; i < probe.biases[l].size(); ++i)
        check_coord(probe.biases[l][i], analytic.biases[l][i]);
    ++report.draws_accepted;
  }

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace flab
