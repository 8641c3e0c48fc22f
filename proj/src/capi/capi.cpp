// C surface over the core library. Exceptions stop here: every entry point
// maps them to a status code and stashes the message in a thread-local slot.

#include "atdkit/atdkit.h"

#include <cstring>
#include <exception>
#include <span>
#include <string>

#include "core/attacks.hpp"
#include "core/config.hpp"
#include "core/errors.hpp"
#include "core/evaluation.hpp"
#include "core/runner.hpp"
#include "core/scores.hpp"

using namespace atdkit;

struct atdk_model {
  ClassifierModel impl;
};

struct atdk_detector {
  ResolvedScore impl;
};

namespace {

thread_local std::string g_last_error;

atdk_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return ATDK_ERR_INVALID_ARGUMENT;
    case ErrorCode::Config: return ATDK_ERR_CONFIG;
    case ErrorCode::Io: return ATDK_ERR_IO;
    case ErrorCode::Numeric: return ATDK_ERR_NUMERIC;
    case ErrorCode::Contract: return ATDK_ERR_CONTRACT;
    case ErrorCode::Internal: return ATDK_ERR_INTERNAL;
  }
  return ATDK_ERR_INTERNAL;
}

// Runs the body, translating exceptions into statuses. Success clears the
// error slot so stale messages never outlive the call that set them.
template <typename Fn>
atdk_status guarded(Fn&& body) {
  try {
    body();
    g_last_error.clear();
    return ATDK_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ATDK_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return ATDK_ERR_INTERNAL;
  }
}

atdk_status require_arg(bool ok, const char* message) {
  if (ok) return ATDK_OK;
  g_last_error = message;
  return ATDK_ERR_INVALID_ARGUMENT;
}

Tensor to_tensor(const double* inputs, std::size_t n, std::size_t input_size) {
  Tensor x({n, input_size});
  std::memcpy(x.data(), inputs, n * input_size * sizeof(double));
  return x;
}

std::size_t detector_input_size_of(const ResolvedScore& rs) {
  if (rs.classifier) {
    std::size_t flat = 1;
    for (std::size_t d : rs.classifier->input_dims()) flat *= d;
    return flat;
  }
  if (rs.bundle->mode == AtdMode::Feature) {
    std::size_t flat = 1;
    for (std::size_t d : rs.bundle->extractor.input_dims()) flat *= d;
    return flat;
  }
  return rs.bundle->disc.input_dim();
}

}  // namespace

extern "C" {

const char* atdk_version(void) { return ATDKIT_VERSION_STRING; }

const char* atdk_status_name(atdk_status status) {
  switch (status) {
    case ATDK_OK: return "ok";
    case ATDK_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case ATDK_ERR_CONFIG: return "config";
    case ATDK_ERR_IO: return "io";
    case ATDK_ERR_NUMERIC: return "numeric";
    case ATDK_ERR_CONTRACT: return "contract";
    case ATDK_ERR_INTERNAL: return "internal";
  }
  return "?";
}

const char* atdk_last_error(void) { return g_last_error.c_str(); }

atdk_status atdk_config_check(const char* config_path) {
  if (atdk_status s = require_arg(config_path != nullptr,
                                  "config_path is NULL");
      s != ATDK_OK) {
    return s;
  }
  return guarded([&] { load_run_config(config_path); });
}

atdk_status atdk_run(const char* config_path, int64_t seed_override,
                     const char* out_dir) {
  if (atdk_status s = require_arg(config_path != nullptr,
                                  "config_path is NULL");
      s != ATDK_OK) {
    return s;
  }
  return guarded([&] {
    std::optional<std::uint64_t> seed;
    if (seed_override >= 0) seed = static_cast<std::uint64_t>(seed_override);
    const std::string out = out_dir ? out_dir : "";
    RunConfig cfg = load_run_config(config_path, seed, out);
    execute_run(cfg);
  });
}

atdk_status atdk_auroc(const double* in_scores, size_t n_in,
                       const double* out_scores, size_t n_out,
                       double* result) {
  if (atdk_status s = require_arg(
          in_scores != nullptr && out_scores != nullptr && result != nullptr,
          "score buffers and result must be non-NULL");
      s != ATDK_OK) {
    return s;
  }
  return guarded([&] {
    *result = auroc(std::span<const double>(in_scores, n_in),
                    std::span<const double>(out_scores, n_out));
  });
}

atdk_model* atdk_model_load(const char* checkpoint_path) {
  if (!checkpoint_path) {
    g_last_error = "checkpoint_path is NULL";
    return nullptr;
  }
  atdk_model* handle = nullptr;
  guarded([&] {
    auto* m = new atdk_model{load_classifier(checkpoint_path)};
    m->impl.set_training(false);
    handle = m;
  });
  return handle;
}

void atdk_model_free(atdk_model* model) { delete model; }

atdk_status atdk_model_input_size(const atdk_model* model, size_t* size) {
  if (atdk_status s = require_arg(model != nullptr && size != nullptr,
                                  "model and size must be non-NULL");
      s != ATDK_OK) {
    return s;
  }
  std::size_t flat = 1;
  for (std::size_t d : model->impl.input_dims()) flat *= d;
  *size = flat;
  return ATDK_OK;
}

atdk_status atdk_model_num_classes(const atdk_model* model, size_t* classes) {
  if (atdk_status s = require_arg(model != nullptr && classes != nullptr,
                                  "model and classes must be non-NULL");
      s != ATDK_OK) {
    return s;
  }
  *classes = model->impl.num_classes();
  return ATDK_OK;
}

atdk_status atdk_model_logits(atdk_model* model, const double* inputs,
                              size_t n, size_t input_size, double* out) {
  if (atdk_status s = require_arg(
          model != nullptr && inputs != nullptr && out != nullptr && n > 0,
          "model, inputs, and out must be non-NULL and n > 0");
      s != ATDK_OK) {
    return s;
  }
  return guarded([&] {
    Tensor x = to_tensor(inputs, n, input_size);
    Tensor logits = model->impl.logits(x);
    std::memcpy(out, logits.data(), logits.size() * sizeof(double));
  });
}

atdk_detector* atdk_detector_open(const char* kind, const char* path) {
  if (!kind || !path) {
    g_last_error = "kind and path must be non-NULL";
    return nullptr;
  }
  atdk_detector* handle = nullptr;
  guarded([&] {
    ScoreSpec spec;
    spec.kind = kind;
    if (spec.kind == "msp") {
      spec.classifier = path;
    } else if (spec.kind == "discriminator") {
      spec.bundle = path;
    } else {
      spec.detector = path;
    }
    spec.validate("detector");
    handle = new atdk_detector{resolve_score(spec)};
  });
  return handle;
}

void atdk_detector_free(atdk_detector* detector) { delete detector; }

atdk_status atdk_detector_input_size(const atdk_detector* detector,
                                     size_t* size) {
  if (atdk_status s = require_arg(detector != nullptr && size != nullptr,
                                  "detector and size must be non-NULL");
      s != ATDK_OK) {
    return s;
  }
  *size = detector_input_size_of(detector->impl);
  return ATDK_OK;
}

atdk_status atdk_detector_score(atdk_detector* detector, const double* inputs,
                                size_t n, size_t input_size, double* out) {
  if (atdk_status s = require_arg(
          detector != nullptr && inputs != nullptr && out != nullptr && n > 0,
          "detector, inputs, and out must be non-NULL and n > 0");
      s != ATDK_OK) {
    return s;
  }
  return guarded([&] {
    Tensor x = to_tensor(inputs, n, input_size);
    const std::vector<double> scores = detector->impl.fn->score(x);
    std::memcpy(out, scores.data(), scores.size() * sizeof(double));
  });
}

atdk_status atdk_detector_attack(atdk_detector* detector,
                                 const double* inputs, size_t n,
                                 size_t input_size, double epsilon, int steps,
                                 int role_in, double clamp_lo, double clamp_hi,
                                 uint64_t seed, double* out) {
  if (atdk_status s = require_arg(
          detector != nullptr && inputs != nullptr && out != nullptr && n > 0,
          "detector, inputs, and out must be non-NULL and n > 0");
      s != ATDK_OK) {
    return s;
  }
  return guarded([&] {
    Tensor x = to_tensor(inputs, n, input_size);
    AttackConfig cfg;
    cfg.epsilon = epsilon;
    cfg.steps = steps;
    if (clamp_lo < clamp_hi) cfg.clamp = ClampRange{clamp_lo, clamp_hi};
    const DetectorRole role = role_in ? DetectorRole::In : DetectorRole::Out;
    Tensor adv = attack_score_pgd(*detector->impl.fn, x, cfg, role, seed);
    std::memcpy(out, adv.data(), adv.size() * sizeof(double));
  });
}

}  // extern "C"
