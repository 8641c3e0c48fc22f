#include "core/scores.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/errors.hpp"
#include "core/losses.hpp"

namespace atdkit {
namespace {

void require_eval_mode(const ClassifierModel& model, const char* who) {
  require(!model.training(), ErrorCode::Contract, who,
          ": model must be in eval mode for scoring");
}

Eigen::MatrixXd to_matrix(const Tensor& t) {
  const std::size_t n = t.batch(), d = t.sample_size();
  Eigen::MatrixXd m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = t.row(i);
    for (std::size_t j = 0; j < d; ++j) m(i, j) = row[j];
  }
  return m;
}

// Shared MSP machinery: per-sample max softmax probability and its gradient
// w.r.t. the logits.
void msp_row(std::span<const double> logits, double& value,
             std::span<double> grad) {
  std::vector<double> p(logits.size());
  loss::softmax_row(logits, p);
  std::size_t best = 0;
  for (std::size_t j = 1; j < p.size(); ++j) {
    if (p[j] > p[best]) best = j;
  }
  value = p[best];
  for (std::size_t j = 0; j < p.size(); ++j) {
    grad[j] = p[best] * ((j == best ? 1.0 : 0.0) - p[j]);
  }
}

ObjectiveEval msp_objective(ClassifierModel& model, const Tensor& x) {
  Tensor logits = model.logits(x);
  const std::size_t n = logits.batch();
  ObjectiveEval out;
  out.values.resize(n);
  Tensor glogits(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    msp_row(logits.row(i), out.values[i], glogits.row(i));
  }
  out.grad = model.backward_from_logits(glogits);
  out.grad = out.grad.reshaped({n, out.grad.size() / n});
  return out;
}

}  // namespace

// --- GaussianBank ---

GaussianBank fit_gaussian_bank(const Tensor& features,
                               std::span<const int> labels,
                               std::size_t classes, double lambda_rel) {
  require(features.rank() == 2, ErrorCode::Contract,
          "gaussian fit: features must be [N, d]");
  const std::size_t n = features.batch(), d = features.sample_size();
  require(n > 0 && d > 0, ErrorCode::Contract, "gaussian fit: empty features");
  require(labels.size() == n, ErrorCode::Contract,
          "gaussian fit: label count mismatch");
  require(classes >= 1, ErrorCode::Contract, "gaussian fit: need >= 1 class");
  require(features.all_finite(), ErrorCode::Contract,
          "gaussian fit: non-finite features");
  require(lambda_rel >= 0.0, ErrorCode::InvalidArgument,
          "gaussian fit: lambda_rel must be >= 0");

  const Eigen::MatrixXd f = to_matrix(features);
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < n; ++i) {
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < classes,
            ErrorCode::Contract, "gaussian fit: label out of range at ", i);
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t k = 0; k < classes; ++k) {
    require(counts[k] > 0, ErrorCode::Contract, "gaussian fit: class ", k,
            " has no samples");
  }

  GaussianBank bank;
  bank.classes = classes;
  bank.dim = d;
  bank.fitted_on = n;
  bank.means = Eigen::MatrixXd::Zero(classes, d);
  for (std::size_t i = 0; i < n; ++i) {
    bank.means.row(labels[i]) += f.row(i);
  }
  for (std::size_t k = 0; k < classes; ++k) {
    bank.means.row(k) /= static_cast<double>(counts[k]);
  }
  bank.mean0 = f.colwise().mean().transpose();

  // Scatter around the class means, pooled over every sample and divided by
  // the total count (not per-class counts).
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd cov0 = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd dk = f.row(i).transpose() -
                               bank.means.row(labels[i]).transpose();
    cov.noalias() += dk * dk.transpose();
    const Eigen::VectorXd d0 = f.row(i).transpose() - bank.mean0;
    cov0.noalias() += d0 * d0.transpose();
  }
  cov /= static_cast<double>(n);
  cov0 /= static_cast<double>(n);

  bank.lambda = lambda_rel * cov.trace() / static_cast<double>(d);
  bank.lambda0 = lambda_rel * cov0.trace() / static_cast<double>(d);

  auto factor = [d](Eigen::MatrixXd m, double lambda, const char* which)
      -> Eigen::LLT<Eigen::MatrixXd> {
    m.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
      const double hi = es.eigenvalues().maxCoeff();
      const double lo = es.eigenvalues().minCoeff();
      raise(ErrorCode::Numeric, "gaussian fit: ", which,
            " covariance is not positive definite after ridge ", lambda,
            " (eigenvalue range [", lo, ", ", hi, "], dim ", d, ")");
    }
    return llt;
  };
  bank.chol = factor(cov, bank.lambda, "class");
  bank.chol0 = factor(cov0, bank.lambda0, "background");
  bank.cov = std::move(cov);
  bank.cov0 = std::move(cov0);
  return bank;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* what) {
  require(j.is_array() && !j.empty(), ErrorCode::Io, what,
          ": expected a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    require(j[r].is_array() && j[r].size() == cols, ErrorCode::Io, what,
            ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
    }
  }
  return m;
}

}  // namespace

nlohmann::json gaussian_bank_to_json(const GaussianBank& bank) {
  require(bank.fitted_on > 0, ErrorCode::Contract,
          "gaussian bank: cannot serialize an unfitted bank");
  nlohmann::json j;
  j["classes"] = bank.classes;
  j["dim"] = bank.dim;
  j["fitted_on"] = bank.fitted_on;
  j["lambda"] = bank.lambda;
  j["lambda0"] = bank.lambda0;
  j["means"] = matrix_to_json(bank.means);
  nlohmann::json mean0 = nlohmann::json::array();
  for (Eigen::Index i = 0; i < bank.mean0.size(); ++i) {
    mean0.push_back(bank.mean0(i));
  }
  j["mean0"] = std::move(mean0);
  j["cov"] = matrix_to_json(bank.cov);
  j["cov0"] = matrix_to_json(bank.cov0);
  return j;
}

GaussianBank gaussian_bank_from_json(const nlohmann::json& j) {
  GaussianBank bank;
  bank.classes = j.at("classes").get<std::size_t>();
  bank.dim = j.at("dim").get<std::size_t>();
  bank.fitted_on = j.at("fitted_on").get<std::size_t>();
  bank.lambda = j.at("lambda").get<double>();
  bank.lambda0 = j.at("lambda0").get<double>();
  bank.means = matrix_from_json(j.at("means"), "gaussian bank means");
  const auto& m0 = j.at("mean0");
  bank.mean0 = Eigen::VectorXd(m0.size());
  for (std::size_t i = 0; i < m0.size(); ++i) bank.mean0(i) = m0[i].get<double>();
  bank.cov = matrix_from_json(j.at("cov"), "gaussian bank cov");
  bank.cov0 = matrix_from_json(j.at("cov0"), "gaussian bank cov0");
  require(bank.means.rows() == static_cast<Eigen::Index>(bank.classes) &&
              bank.means.cols() == static_cast<Eigen::Index>(bank.dim),
          ErrorCode::Io, "gaussian bank: means shape mismatch");
  require(bank.cov.rows() == static_cast<Eigen::Index>(bank.dim) &&
              bank.cov.cols() == static_cast<Eigen::Index>(bank.dim),
          ErrorCode::Io, "gaussian bank: cov shape mismatch");
  // Refactorizing the stored matrices reproduces the original solves exactly:
  // the factorization is a deterministic function of its input bits.
  Eigen::MatrixXd reg = bank.cov;
  reg.diagonal().array() += bank.lambda;
  bank.chol.compute(reg);
  require(bank.chol.info() == Eigen::Success, ErrorCode::Numeric,
          "gaussian bank: stored class covariance is not positive definite");
  Eigen::MatrixXd reg0 = bank.cov0;
  reg0.diagonal().array() += bank.lambda0;
  bank.chol0.compute(reg0);
  require(bank.chol0.info() == Eigen::Success, ErrorCode::Numeric,
          "gaussian bank: stored background covariance is not positive definite");
  return bank;
}

nlohmann::json weibull_bank_to_json(const WeibullBank& bank) {
  require(bank.fitted, ErrorCode::Contract,
          "weibull bank: cannot serialize an unfitted bank");
  nlohmann::json j;
  j["classes"] = bank.classes;
  j["alpha_top"] = bank.alpha_top;
  j["tail_size"] = bank.tail_size;
  j["mav"] = matrix_to_json(bank.mav);
  nlohmann::json tails = nlohmann::json::array();
  for (const WeibullTail& t : bank.tails) {
    tails.push_back({{"shape", t.shape}, {"scale", t.scale}, {"shift", t.shift}});
  }
  j["tails"] = std::move(tails);
  return j;
}

WeibullBank weibull_bank_from_json(const nlohmann::json& j) {
  WeibullBank bank;
  bank.classes = j.at("classes").get<std::size_t>();
  bank.alpha_top = j.at("alpha_top").get<int>();
  bank.tail_size = j.at("tail_size").get<int>();
  bank.mav = matrix_from_json(j.at("mav"), "weibull bank mav");
  for (const auto& t : j.at("tails")) {
    WeibullTail tail;
    tail.shape = t.at("shape").get<double>();
    tail.scale = t.at("scale").get<double>();
    tail.shift = t.at("shift").get<double>();
    bank.tails.push_back(tail);
  }
  require(bank.tails.size() == bank.classes, ErrorCode::Io,
          "weibull bank: tail count mismatch");
  bank.fitted = true;
  return bank;
}

double md_class(const GaussianBank& bank, std::span<const double> z,
                std::size_t k) {
  require(bank.fitted_on > 0, ErrorCode::Contract, "gaussian bank: not fitted");
  require(z.size() == bank.dim, ErrorCode::Contract,
          "gaussian bank: dim mismatch");
  require(k < bank.classes, ErrorCode::Contract, "gaussian bank: class ", k,
          " out of range");
  Eigen::Map<const Eigen::VectorXd> zv(z.data(), z.size());
  const Eigen::VectorXd diff = zv - bank.means.row(k).transpose();
  return diff.dot(bank.chol.solve(diff));
}

std::vector<double> md_all(const GaussianBank& bank, std::span<const double> z) {
  std::vector<double> out(bank.classes);
  for (std::size_t k = 0; k < bank.classes; ++k) out[k] = md_class(bank, z, k);
  return out;
}

double md_background(const GaussianBank& bank, std::span<const double> z) {
  require(bank.fitted_on > 0, ErrorCode::Contract, "gaussian bank: not fitted");
  require(z.size() == bank.dim, ErrorCode::Contract,
          "gaussian bank: dim mismatch");
  Eigen::Map<const Eigen::VectorXd> zv(z.data(), z.size());
  const Eigen::VectorXd diff = zv - bank.mean0;
  return diff.dot(bank.chol0.solve(diff));
}

// --- WeibullBank ---

namespace {

WeibullTail fit_weibull_tail(std::vector<double> distances, int tail_size) {
  require(!distances.empty(), ErrorCode::Contract,
          "weibull fit: empty distance set");
  std::sort(distances.begin(), distances.end(), std::greater<>());
  const std::size_t take =
      std::min<std::size_t>(distances.size(), static_cast<std::size_t>(tail_size));
  distances.resize(take);

  WeibullTail tail;
  const double mn = *std::min_element(distances.begin(), distances.end());
  tail.shift = mn - 1.0;  // translated samples start at 1

  std::vector<double> logs(take);
  for (std::size_t i = 0; i < take; ++i) {
    logs[i] = std::log(distances[i] - tail.shift);
  }
  const double log_max = *std::max_element(logs.begin(), logs.end());
  const double log_mean =
      std::accumulate(logs.begin(), logs.end(), 0.0) / static_cast<double>(take);

  if (log_max - *std::min_element(logs.begin(), logs.end()) < 1e-9) {
    // Degenerate tail: all distances equal. Extremely peaked fit.
    tail.shape = 100.0;
    tail.scale = std::exp(log_mean);
    return tail;
  }

  // Profile likelihood root in the shape parameter; g is increasing in k.
  // Sums are normalized by exp(k * log_max) to stay finite.
  auto g = [&](double k) {
    double num = 0.0, den = 0.0;
    for (double l : logs) {
      const double w = std::exp(k * (l - log_max));
      num += w * l;
      den += w;
    }
    return num / den - 1.0 / k - log_mean;
  };
  double lo = 1e-3, hi = 1e4;
  if (g(lo) > 0.0) {
    tail.shape = lo;
  } else if (g(hi) < 0.0) {
    tail.shape = hi;
  } else {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) > 0.0 ? hi : lo) = mid;
    }
    tail.shape = 0.5 * (lo + hi);
  }

  double den = 0.0;
  for (double l : logs) den += std::exp(tail.shape * (l - log_max));
  tail.scale = std::exp(log_max + std::log(den / static_cast<double>(take)) /
                                      tail.shape);
  return tail;
}

}  // namespace

WeibullBank fit_weibull_bank(const Tensor& logits, std::span<const int> labels,
                             std::size_t classes, int tail_size,
                             int alpha_top) {
  require(logits.rank() == 2 && logits.dim(1) == classes, ErrorCode::Contract,
          "weibull fit: logits must be [N, classes]");
  require(labels.size() == logits.batch(), ErrorCode::Contract,
          "weibull fit: label count mismatch");
  require(tail_size >= 1, ErrorCode::InvalidArgument,
          "weibull fit: tail_size must be >= 1");

  WeibullBank bank;
  bank.classes = classes;
  bank.tail_size = tail_size;
  bank.alpha_top = alpha_top < 0
                       ? static_cast<int>(std::min<std::size_t>(3, classes))
                       : alpha_top;
  require(bank.alpha_top >= 1 &&
              static_cast<std::size_t>(bank.alpha_top) <= classes,
          ErrorCode::InvalidArgument, "weibull fit: alpha_top out of range");

  // Only correctly classified samples shape the class statistics.
  const std::vector<int> preds = loss::argmax_rows(logits);
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < logits.batch(); ++i) {
    const int y = labels[i];
    require(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorCode::Contract,
            "weibull fit: label out of range at ", i);
    if (preds[i] == y) members[static_cast<std::size_t>(y)].push_back(i);
  }

  bank.mav = Eigen::MatrixXd::Zero(classes, classes);
  bank.tails.resize(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    require(!members[k].empty(), ErrorCode::Contract, "weibull fit: class ", k,
            " has no correctly classified samples");
    for (std::size_t i : members[k]) {
      auto row = logits.row(i);
      for (std::size_t j = 0; j < classes; ++j) bank.mav(k, j) += row[j];
    }
    bank.mav.row(k) /= static_cast<double>(members[k].size());

    std::vector<double> distances;
    distances.reserve(members[k].size());
    for (std::size_t i : members[k]) {
      auto row = logits.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < classes; ++j) {
        const double dlt = row[j] - bank.mav(k, j);
        acc += dlt * dlt;
      }
      distances.push_back(std::sqrt(acc));
    }
    bank.tails[k] = fit_weibull_tail(std::move(distances), tail_size);
  }
  bank.fitted = true;
  return bank;
}

double weibull_cdf(const WeibullTail& tail, double distance) {
  if (distance <= tail.shift) return 0.0;
  const double t = (distance - tail.shift) / tail.scale;
  return 1.0 - std::exp(-std::pow(t, tail.shape));
}

std::vector<double> openmax_probs(const WeibullBank& bank,
                                  std::span<const double> logits) {
  require(bank.fitted, ErrorCode::Contract, "weibull bank: not fitted");
  require(logits.size() == bank.classes, ErrorCode::Contract,
          "weibull bank: logit width mismatch");
  const std::size_t k = bank.classes;
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return logits[a] > logits[b];
  });

  std::vector<double> revised(logits.begin(), logits.end());
  double unknown = 0.0;
  const int alpha = bank.alpha_top;
  for (int i = 0; i < alpha; ++i) {
    const std::size_t cls = order[static_cast<std::size_t>(i)];
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double dlt = logits[j] - bank.mav(cls, j);
      acc += dlt * dlt;
    }
    const double rank_weight =
        static_cast<double>(alpha - i) / static_cast<double>(alpha);
    const double w = rank_weight * weibull_cdf(bank.tails[cls], std::sqrt(acc));
    unknown += logits[cls] * w;
    revised[cls] = logits[cls] * (1.0 - w);
  }

  std::vector<double> full(k + 1);
  full[0] = unknown;
  std::copy(revised.begin(), revised.end(), full.begin() + 1);
  std::vector<double> probs(k + 1);
  loss::softmax_row(full, probs);
  return probs;
}

// --- MspScore ---

std::vector<double> MspScore::score(const Tensor& x) {
  require_eval_mode(model_, "msp");
  Tensor logits = model_.logits(x);
  std::vector<double> out(logits.batch());
  std::vector<double> p(logits.dim(1));
  for (std::size_t i = 0; i < logits.batch(); ++i) {
    loss::softmax_row(logits.row(i), p);
    out[i] = *std::max_element(p.begin(), p.end());
  }
  return out;
}

ObjectiveEval MspScore::objective_grad(const Tensor& x) {
  require_eval_mode(model_, "msp");
  return msp_objective(model_, x);
}

// --- MdScore ---

std::vector<double> MdScore::score(const Tensor& x) {
  require_eval_mode(model_, "md");
  Tensor z = model_.features(x);
  std::vector<double> out(z.batch());
  for (std::size_t i = 0; i < z.batch(); ++i) {
    const std::vector<double> ds = md_all(bank_, z.row(i));
    out[i] = -*std::min_element(ds.begin(), ds.end());
  }
  return out;
}

ObjectiveEval MdScore::objective_grad(const Tensor& x) {
  require_eval_mode(model_, "md");
  Tensor z = model_.features(x);
  const std::size_t n = z.batch(), d = z.sample_size();
  ObjectiveEval out;
  out.values.resize(n);
  Tensor gz({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    auto zi = z.row(i);
    const std::vector<double> ds = md_all(bank_, zi);
    // Ties break toward the lowest class index.
    const std::size_t best = static_cast<std::size_t>(
        std::min_element(ds.begin(), ds.end()) - ds.begin());
    out.values[i] = -ds[best];
    Eigen::Map<const Eigen::VectorXd> zv(zi.data(), d);
    const Eigen::VectorXd diff = zv - bank_.means.row(best).transpose();
    const Eigen::VectorXd solved = bank_.chol.solve(diff);
    auto gi = gz.row(i);
    for (std::size_t j = 0; j < d; ++j) gi[j] = -2.0 * solved[j];
  }
  out.grad = model_.backward_from_features(gz);
  out.grad = out.grad.reshaped({n, out.grad.size() / n});
  return out;
}

// --- RmdScore ---

std::vector<double> RmdScore::score(const Tensor& x) {
  require_eval_mode(model_, "rmd");
  Tensor z = model_.features(x);
  std::vector<double> out(z.batch());
  for (std::size_t i = 0; i < z.batch(); ++i) {
    auto zi = z.row(i);
    const std::vector<double> ds = md_all(bank_, zi);
    const double bg = md_background(bank_, zi);
    double best = ds[0] - bg;
    for (double dk : ds) best = std::min(best, dk - bg);
    out[i] = -best;
  }
  return out;
}

ObjectiveEval RmdScore::objective_grad(const Tensor& x) {
  require_eval_mode(model_, "rmd");
  Tensor z = model_.features(x);
  const std::size_t n = z.batch(), d = z.sample_size();
  ObjectiveEval out;
  out.values.resize(n);
  Tensor gz({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    auto zi = z.row(i);
    const std::vector<double> ds = md_all(bank_, zi);
    const double bg = md_background(bank_, zi);
    std::size_t best = 0;
    for (std::size_t k = 1; k < ds.size(); ++k) {
      if (ds[k] - bg < ds[best] - bg) best = k;
    }
    out.values[i] = -(ds[best] - bg);
    Eigen::Map<const Eigen::VectorXd> zv(zi.data(), d);
    const Eigen::VectorXd diff = zv - bank_.means.row(best).transpose();
    const Eigen::VectorXd diff0 = zv - bank_.mean0;
    const Eigen::VectorXd solved = bank_.chol.solve(diff);
    const Eigen::VectorXd solved0 = bank_.chol0.solve(diff0);
    auto gi = gz.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      gi[j] = -2.0 * (solved[j] - solved0[j]);
    }
  }
  out.grad = model_.backward_from_features(gz);
  out.grad = out.grad.reshaped({n, out.grad.size() / n});
  return out;
}

// --- OpenMaxScore ---

std::vector<double> OpenMaxScore::score(const Tensor& x) {
  require_eval_mode(model_, "openmax");
  Tensor logits = model_.logits(x);
  std::vector<double> out(logits.batch());
  for (std::size_t i = 0; i < logits.batch(); ++i) {
    const std::vector<double> probs = openmax_probs(bank_, logits.row(i));
    out[i] = 1.0 - probs[0];
  }
  return out;
}

ObjectiveEval OpenMaxScore::objective_grad(const Tensor& x) {
  require_eval_mode(model_, "openmax");
  return msp_objective(model_, x);
}

// --- DiscriminatorScore ---

std::vector<double> DiscriminatorScore::score(const Tensor& x) {
  require(!disc_.training(), ErrorCode::Contract,
          "discriminator: must be in eval mode for scoring");
  if (extractor_) {
    Tensor z = extractor_->features(x);
    return disc_.probability(z.reshaped({z.batch(), z.sample_size()}));
  }
  return disc_.probability(x.reshaped({x.batch(), x.sample_size()}));
}

ObjectiveEval DiscriminatorScore::objective_grad(const Tensor& x) {
  require(!disc_.training(), ErrorCode::Contract,
          "discriminator: must be in eval mode for scoring");
  return discriminator_logit_objective(extractor_, disc_, x);
}

ObjectiveEval discriminator_logit_objective(FeatureExtractor* extractor,
                                            Discriminator& disc,
                                            const Tensor& x) {
  const std::size_t n = x.batch();
  Tensor feats = extractor ? extractor->features(x)
                           : x.reshaped({n, x.sample_size()});
  feats = feats.reshaped({n, feats.size() / n});
  Tensor logit = disc.logit(feats);
  ObjectiveEval out;
  out.values.assign(logit.data(), logit.data() + logit.size());
  Tensor ones({n});
  ones.fill(1.0);
  Tensor gfeat = disc.backward(ones);
  out.grad = extractor ? extractor->backward(gfeat) : gfeat;
  out.grad = out.grad.reshaped({n, out.grad.size() / n});
  return out;
}

// --- attack entry points ---

Tensor attack_score_pgd(ScoreFunction& fn, const Tensor& x,
                        const AttackConfig& cfg, DetectorRole role,
                        std::uint64_t seed, AttackTrace* trace) {
  const Direction dir =
      role == DetectorRole::In ? Direction::Minimize : Direction::Maximize;
  return pgd(
      x, [&fn](const Tensor& v) { return fn.objective_grad(v); }, dir, cfg,
      seed, trace);
}

Tensor attack_score_fgsm(ScoreFunction& fn, const Tensor& x, double epsilon,
                         const std::optional<ClampRange>& clamp,
                         DetectorRole role) {
  const Direction dir =
      role == DetectorRole::In ? Direction::Minimize : Direction::Maximize;
  return fgsm(
      x, [&fn](const Tensor& v) { return fn.objective_grad(v); }, dir, epsilon,
      clamp);
}

Tensor attack_classifier_ce(ClassifierModel& model, const Tensor& x,
                            std::span<const int> labels,
                            const AttackConfig& cfg, std::uint64_t seed) {
  std::vector<int> y(labels.begin(), labels.end());
  auto objective = [&model, y](const Tensor& v) {
    Tensor logits = model.logits(v);
    loss::PerSampleLossGrad per = loss::ce_labels_per_sample(logits, y);
    ObjectiveEval out;
    out.values = std::move(per.values);
    out.grad = model.backward_from_logits(per.grad);
    out.grad = out.grad.reshaped({v.batch(), out.grad.size() / v.batch()});
    return out;
  };
  return pgd(x.reshaped({x.batch(), x.sample_size()}), objective,
             Direction::Maximize, cfg, seed);
}

Tensor attack_classifier_ce_predicted(ClassifierModel& model, const Tensor& x,
                                      const AttackConfig& cfg,
                                      std::uint64_t seed) {
  const bool was_training = model.training();
  model.set_training(false);
  Tensor logits = model.logits(x);
  model.set_training(was_training);
  const std::vector<int> preds = loss::argmax_rows(logits);
  return attack_classifier_ce(model, x, preds, cfg, seed);
}

}  // namespace atdkit
