#include "dialscore/policy.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dialscore/vocab.hpp"

namespace dialscore {

namespace {

constexpr int kH = kHiddenSize;
constexpr int kV = vocab::kSize;
constexpr int kD = kObsDim;

void check_tokens(const std::vector<int>& tokens) {
  if (tokens.empty()) throw std::invalid_argument("token sequence is empty");
  for (int t : tokens) {
    if (t < 0 || t >= kV) {
      throw std::invalid_argument("unknown token index " + std::to_string(t));
    }
  }
}

void check_observation(const Observation& obs) {
  if (obs.features.size() != kD) {
    throw std::invalid_argument("observation dimension must be " + std::to_string(kD));
  }
}

Eigen::VectorXd logits_at(const PolicyParameters& p, const Eigen::VectorXd& h) {
  return p.out_head * h + p.out_bias;
}

// log softmax at temperature 1 over the full vocabulary
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

Eigen::VectorXd initial_hidden(const PolicyParameters& p, const Observation& obs) {
  return (p.obs_proj * obs.features).array().tanh().matrix();
}

Eigen::VectorXd step_hidden(const PolicyParameters& p, const Eigen::VectorXd& h,
                            int token) {
  return (p.rec_in * p.embed.row(token).transpose() + p.rec_hid * h + p.rec_bias)
      .array()
      .tanh()
      .matrix();
}

}  // namespace

PolicyParameters PolicyParameters::zeros() {
  PolicyParameters p;
  p.obs_proj = Eigen::MatrixXd::Zero(kH, kD);
  p.embed = Eigen::MatrixXd::Zero(kV, kH);
  p.rec_in = Eigen::MatrixXd::Zero(kH, kH);
  p.rec_hid = Eigen::MatrixXd::Zero(kH, kH);
  p.rec_bias = Eigen::VectorXd::Zero(kH);
  p.out_head = Eigen::MatrixXd::Zero(kV, kH);
  p.out_bias = Eigen::VectorXd::Zero(kV);
  return p;
}

PolicyParameters& PolicyParameters::operator+=(const PolicyParameters& o) {
  obs_proj += o.obs_proj;
  embed += o.embed;
  rec_in += o.rec_in;
  rec_hid += o.rec_hid;
  rec_bias += o.rec_bias;
  out_head += o.out_head;
  out_bias += o.out_bias;
  return *this;
}

PolicyParameters& PolicyParameters::operator*=(double s) {
  obs_proj *= s;
  embed *= s;
  rec_in *= s;
  rec_hid *= s;
  rec_bias *= s;
  out_head *= s;
  out_bias *= s;
  return *this;
}

double PolicyParameters::max_abs_diff(const PolicyParameters& o) const {
  double m = 0.0;
  m = std::max(m, (obs_proj - o.obs_proj).cwiseAbs().maxCoeff());
  m = std::max(m, (embed - o.embed).cwiseAbs().maxCoeff());
  m = std::max(m, (rec_in - o.rec_in).cwiseAbs().maxCoeff());
  m = std::max(m, (rec_hid - o.rec_hid).cwiseAbs().maxCoeff());
  m = std::max(m, (rec_bias - o.rec_bias).cwiseAbs().maxCoeff());
  m = std::max(m, (out_head - o.out_head).cwiseAbs().maxCoeff());
  m = std::max(m, (out_bias - o.out_bias).cwiseAbs().maxCoeff());
  return m;
}

bool PolicyParameters::all_finite() const {
  return obs_proj.allFinite() && embed.allFinite() && rec_in.allFinite() &&
         rec_hid.allFinite() && rec_bias.allFinite() && out_head.allFinite() &&
         out_bias.allFinite();
}

PolicyParameters init_parameters(std::uint64_t seed) {
  RngStream rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kH));
  auto fill = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-scale, scale);
  };
  auto fillv = [&](Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-scale, scale);
  };
  PolicyParameters p = PolicyParameters::zeros();
  fill(p.obs_proj);
  fill(p.embed);
  fill(p.rec_in);
  fill(p.rec_hid);
  fillv(p.rec_bias);
  fill(p.out_head);
  fillv(p.out_bias);
  return p;
}

SampledSequence sample_sequence(const PolicyParameters& params, const Observation& obs,
                                double temperature, RngStream& rng, int max_len) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  check_observation(obs);
  SampledSequence seq;
  Eigen::VectorXd h = initial_hidden(params, obs);
  for (int t = 0; t < max_len; ++t) {
    const Eigen::VectorXd logits = logits_at(params, h);
    const Eigen::VectorXd logp = log_softmax(logits);

    // sampling distribution: temperature applied, PAD masked to probability 0
    Eigen::VectorXd scaled = logits / temperature;
    scaled(vocab::PAD) = -std::numeric_limits<double>::infinity();
    const double m = scaled.maxCoeff();
    Eigen::VectorXd probs = (scaled.array() - m).exp().matrix();
    probs /= probs.sum();

    const double u = rng.uniform();
    int token = kV - 1;
    double acc = 0.0;
    for (int v = 0; v < kV; ++v) {
      acc += probs(v);
      if (u < acc) {
        token = v;
        break;
      }
    }
    if (token == vocab::PAD) token = vocab::EOS;  // unreachable, numeric guard

    seq.tokens.push_back(token);
    seq.logprobs.push_back(logp(token));
    if (token == vocab::EOS) break;
    h = step_hidden(params, h, token);
  }
  return seq;
}

std::vector<double> sequence_logprobs(const PolicyParameters& params,
                                      const Observation& obs,
                                      const std::vector<int>& tokens) {
  check_tokens(tokens);
  check_observation(obs);
  std::vector<double> out;
  out.reserve(tokens.size());
  Eigen::VectorXd h = initial_hidden(params, obs);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    out.push_back(log_softmax(logits_at(params, h))(tokens[t]));
    if (t + 1 < tokens.size()) h = step_hidden(params, h, tokens[t]);
  }
  return out;
}

PolicyGradient logprob_gradient(const PolicyParameters& params, const Observation& obs,
                                const std::vector<int>& tokens,
                                const std::vector<double>& weights) {
  check_tokens(tokens);
  check_observation(obs);
  if (weights.size() != tokens.size()) {
    throw std::invalid_argument("weights length must match tokens length");
  }
  const int T = static_cast<int>(tokens.size());

  // forward pass, keeping hidden states and softmax distributions
  std::vector<Eigen::VectorXd> hs(T);
  std::vector<Eigen::VectorXd> ps(T);
  hs[0] = initial_hidden(params, obs);
  for (int t = 0; t < T; ++t) {
    ps[t] = log_softmax(logits_at(params, hs[t])).array().exp().matrix();
    if (t + 1 < T) hs[t + 1] = step_hidden(params, hs[t], tokens[t]);
  }

  PolicyGradient g = PolicyParameters::zeros();
  Eigen::VectorXd dh = Eigen::VectorXd::Zero(kH);
  for (int t = T - 1; t >= 0; --t) {
    Eigen::VectorXd dlogits = -weights[t] * ps[t];
    dlogits(tokens[t]) += weights[t];
    g.out_head += dlogits * hs[t].transpose();
    g.out_bias += dlogits;
    dh += params.out_head.transpose() * dlogits;

    if (t > 0) {
      // through h_t = tanh(rec_in * embed[tok_{t-1}] + rec_hid * h_{t-1} + rec_bias)
      const Eigen::VectorXd da =
          (dh.array() * (1.0 - hs[t].array() * hs[t].array())).matrix();
      const int prev = tokens[t - 1];
      g.rec_in += da * params.embed.row(prev);
      g.embed.row(prev) += (params.rec_in.transpose() * da).transpose();
      g.rec_hid += da * hs[t - 1].transpose();
      g.rec_bias += da;
      dh = params.rec_hid.transpose() * da;
    } else {
      // through h_0 = tanh(obs_proj * features)
      const Eigen::VectorXd da =
          (dh.array() * (1.0 - hs[0].array() * hs[0].array())).matrix();
      g.obs_proj += da * obs.features.transpose();
    }
  }
  return g;
}

PolicyParameters clone_frozen(const PolicyParameters& params) { return params; }

double sft_step(PolicyParameters& params, const Observation& obs,
                const std::vector<int>& target_tokens, double learning_rate) {
  check_tokens(target_tokens);
  const auto lps = sequence_logprobs(params, obs, target_tokens);
  double loss = 0.0;
  for (double lp : lps) loss -= lp;
  loss /= static_cast<double>(lps.size());

  const std::vector<double> weights(target_tokens.size(),
                                    1.0 / static_cast<double>(target_tokens.size()));
  PolicyGradient g = logprob_gradient(params, obs, target_tokens, weights);
  g *= learning_rate;  // ascend mean logprob == descend cross-entropy
  params += g;
  return loss;
}

std::vector<int> greedy_decode(const PolicyParameters& params, const Observation& obs,
                               int max_len) {
  check_observation(obs);
  std::vector<int> tokens;
  Eigen::VectorXd h = initial_hidden(params, obs);
  for (int t = 0; t < max_len; ++t) {
    Eigen::VectorXd logits = logits_at(params, h);
    logits(vocab::PAD) = -std::numeric_limits<double>::infinity();
    Eigen::Index token;
    logits.maxCoeff(&token);
    tokens.push_back(static_cast<int>(token));
    if (token == vocab::EOS) break;
    h = step_hidden(params, h, static_cast<int>(token));
  }
  return tokens;
}

namespace {

constexpr const char* kMagic = "dialscore-checkpoint";
constexpr int kFormatVersion = 1;

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("checkpoint: bad float value '" + s + "'");
  }
  return v;
}

void write_tensor(std::ostream& os, const std::string& name,
                  const Eigen::MatrixXd& m) {
  os << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) os << ' ';
      os << fmt_double(m(r, c));
    }
    os << '\n';
  }
}

Eigen::MatrixXd read_tensor(std::istream& is, const std::string& expect_name) {
  std::string kw, name;
  Eigen::Index rows = 0, cols = 0;
  if (!(is >> kw >> name >> rows >> cols) || kw != "tensor" || name != expect_name) {
    throw std::runtime_error("checkpoint: expected tensor " + expect_name);
  }
  Eigen::MatrixXd m(rows, cols);
  std::string tok;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!(is >> tok)) throw std::runtime_error("checkpoint: truncated tensor " + expect_name);
      m(r, c) = parse_double(tok);
    }
  }
  return m;
}

}  // namespace

void save_checkpoint(const PolicyParameters& params, std::uint64_t rng_state,
                     const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os << kMagic << ' ' << kFormatVersion << '\n';
  os << "H " << kH << "\nV " << kV << "\nD " << kD << "\n";
  os << "rng " << rng_state << '\n';
  write_tensor(os, "obs_proj", params.obs_proj);
  write_tensor(os, "embed", params.embed);
  write_tensor(os, "rec_in", params.rec_in);
  write_tensor(os, "rec_hid", params.rec_hid);
  write_tensor(os, "rec_bias", params.rec_bias);
  write_tensor(os, "out_head", params.out_head);
  write_tensor(os, "out_bias", params.out_bias);
  os << "end\n";
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kMagic || version != kFormatVersion) {
    throw std::runtime_error("checkpoint: bad header or version in " + path);
  }
  std::string kw;
  int h = 0, v = 0, d = 0;
  std::uint64_t rng_state = 0;
  if (!(is >> kw >> h) || kw != "H" || h != kH) throw std::runtime_error("checkpoint: bad H");
  if (!(is >> kw >> v) || kw != "V" || v != kV) throw std::runtime_error("checkpoint: bad V");
  if (!(is >> kw >> d) || kw != "D" || d != kD) throw std::runtime_error("checkpoint: bad D");
  if (!(is >> kw >> rng_state) || kw != "rng") throw std::runtime_error("checkpoint: bad rng state");

  Checkpoint ckpt;
  ckpt.rng_state = rng_state;
  ckpt.params.obs_proj = read_tensor(is, "obs_proj");
  ckpt.params.embed = read_tensor(is, "embed");
  ckpt.params.rec_in = read_tensor(is, "rec_in");
  ckpt.params.rec_hid = read_tensor(is, "rec_hid");
  ckpt.params.rec_bias = read_tensor(is, "rec_bias");
  ckpt.params.out_head = read_tensor(is, "out_head");
  ckpt.params.out_bias = read_tensor(is, "out_bias");
  if (!(is >> kw) || kw != "end") throw std::runtime_error("checkpoint: missing end marker");
  if (ckpt.params.obs_proj.rows() != kH || ckpt.params.obs_proj.cols() != kD ||
      ckpt.params.embed.rows() != kV || ckpt.params.out_bias.size() != kV) {
    throw std::runtime_error("checkpoint: tensor shape mismatch");
  }
  return ckpt;
}

}  // namespace dialscore
