#include "core/data.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace atdkit {

using nlohmann::json;

const char* role_name(Role role) {
  switch (role) {
    case Role::InTrain: return "in-train";
    case Role::InVal: return "in-val";
    case Role::InTest: return "in-test";
    case Role::OutExposure: return "out-exposure";
    case Role::OutVal: return "out-val";
    case Role::OutTest: return "out-test";
  }
  return "?";
}

Role role_from_name(const std::string& name) {
  if (name == "in-train") return Role::InTrain;
  if (name == "in-val") return Role::InVal;
  if (name == "in-test") return Role::InTest;
  if (name == "out-exposure") return Role::OutExposure;
  if (name == "out-val") return Role::OutVal;
  if (name == "out-test") return Role::OutTest;
  raise(ErrorCode::Config, "dataset.role: unknown role '", name, "'");
}

namespace {

void finalize(SampleBatch& batch, const DatasetSpec& spec) {
  if (spec.cap && batch.inputs.batch() > *spec.cap) {
    batch.inputs = batch.inputs.slice_rows(0, *spec.cap);
    if (!batch.labels.empty()) batch.labels.resize(*spec.cap);
  }
  require(batch.inputs.batch() > 0, ErrorCode::Config, "dataset '", spec.name,
          "': empty after load");
  require(batch.inputs.all_finite(), ErrorCode::Config, "dataset '", spec.name,
          "': non-finite values");
  if (batch.pixel_space) {
    for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
      require(batch.inputs[i] >= 0.0 && batch.inputs[i] <= 1.0,
              ErrorCode::Config, "dataset '", spec.name,
              "': pixel value out of [0, 1]");
    }
  }
  batch.name = spec.name;
  batch.role = spec.role;
  batch.ids.resize(batch.inputs.batch());
  for (std::size_t i = 0; i < batch.ids.size(); ++i) {
    batch.ids[i] = spec.name + "#" + std::to_string(i);
  }
}

SampleBatch load_blobs(const DatasetSpec& spec) {
  const auto& p = spec.params;
  require(p.contains("centers"), ErrorCode::Config, "dataset '", spec.name,
          "': blobs needs params.centers");
  const auto centers = p.at("centers").get<std::vector<std::vector<double>>>();
  require(!centers.empty(), ErrorCode::Config, "dataset '", spec.name,
          "': empty centers");
  const std::size_t d = centers[0].size();
  for (const auto& c : centers) {
    require(c.size() == d, ErrorCode::Config, "dataset '", spec.name,
            "': ragged centers");
  }
  const double stdev = p.value("std", 0.3);
  const std::size_t n = p.value("n", std::size_t{64});
  const bool labeled = p.value("labeled", true);

  RngStream rng = RngStream::derive(spec.seed, "blobs");
  SampleBatch batch;
  batch.inputs = Tensor({centers.size() * n, d});
  std::size_t at = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (std::size_t i = 0; i < n; ++i, ++at) {
      auto row = batch.inputs.row(at);
      for (std::size_t j = 0; j < d; ++j) {
        row[j] = centers[c][j] + stdev * rng.normal();
      }
      if (labeled) batch.labels.push_back(static_cast<int>(c));
    }
  }
  return batch;
}

SampleBatch sample_rect_set(const std::vector<Rect>& rects, std::size_t n_per_rect,
                            RngStream& rng, bool labeled) {
  SampleBatch batch;
  batch.inputs = Tensor({rects.size() * n_per_rect, 2});
  std::size_t at = 0;
  for (const Rect& r : rects) {
    for (std::size_t i = 0; i < n_per_rect; ++i, ++at) {
      auto row = batch.inputs.row(at);
      row[0] = rng.uniform(r.lo_x, r.hi_x);
      row[1] = rng.uniform(r.lo_y, r.hi_y);
      if (labeled) batch.labels.push_back(r.label);
    }
  }
  return batch;
}

SampleBatch load_rects(const DatasetSpec& spec) {
  const auto& p = spec.params;
  require(p.contains("rects"), ErrorCode::Config, "dataset '", spec.name,
          "': rects needs params.rects");
  std::vector<Rect> rects;
  for (const auto& rj : p.at("rects")) {
    const auto lo = rj.at("lo").get<std::vector<double>>();
    const auto hi = rj.at("hi").get<std::vector<double>>();
    require(lo.size() == 2 && hi.size() == 2, ErrorCode::Config, "dataset '",
            spec.name, "': rects are 2D");
    Rect r{lo[0], lo[1], hi[0], hi[1], rj.value("label", 0)};
    require(r.lo_x < r.hi_x && r.lo_y < r.hi_y, ErrorCode::Config, "dataset '",
            spec.name, "': degenerate rect");
    rects.push_back(r);
  }
  const std::size_t n = spec.params.value("n_per_rect", std::size_t{64});
  RngStream rng = RngStream::derive(spec.seed, "rects");
  return sample_rect_set(rects, n, rng, spec.params.value("labeled", true));
}

SampleBatch load_toy(const DatasetSpec& spec) {
  // "toy:<layout>:<in|out>"
  const std::string rest = spec.source.substr(4);
  const std::size_t colon = rest.find(':');
  require(colon != std::string::npos, ErrorCode::Config, "dataset '", spec.name,
          "': toy source needs 'toy:<layout>:<in|out>'");
  const std::string layout_name = rest.substr(0, colon);
  const std::string side = rest.substr(colon + 1);
  const double eps = spec.params.value("epsilon", 1.0);
  const std::size_t n = spec.params.value("n_per_rect", std::size_t{100});
  const ToyLayout layout = toy_layout(layout_name, eps);
  if (side == "in") {
    return sample_in_rects(layout, n, spec.seed, spec.name, spec.role);
  }
  if (side == "out") {
    return sample_out_rects(layout, n, spec.seed, spec.name, spec.role);
  }
  raise(ErrorCode::Config, "dataset '", spec.name, "': toy side must be in|out");
}

// Class-conditional synthetic images, 3x32x32 in [0, 1]. The in-family uses
// oriented stripes whose period, phase channel, and direction encode the
// class; out-families use checkerboards or radial rings so they are
// separable without being trivial.
SampleBatch load_images(const DatasetSpec& spec) {
  const std::string variant = spec.source.substr(7);
  const std::size_t classes = spec.params.value("classes", std::size_t{10});
  const std::size_t n = spec.params.value("n", std::size_t{128});
  const bool labeled = variant == "in";

  RngStream rng = RngStream::derive(spec.seed, "images");
  SampleBatch batch;
  batch.pixel_space = true;
  batch.inputs = Tensor({n, 3, 32, 32});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = labeled ? i % classes : 0;
    if (labeled) batch.labels.push_back(static_cast<int>(cls));
    const double phase = rng.uniform(0.0, 6.28318530717958648);
    const double jitter = rng.uniform(0.8, 1.2);
    double* img = batch.inputs.data() + i * 3 * 32 * 32;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double gain = (labeled && ch == cls % 3) ? 0.30 : 0.18;
      for (std::size_t y = 0; y < 32; ++y) {
        for (std::size_t x = 0; x < 32; ++x) {
          double wave = 0.0;
          if (variant == "in") {
            const double period = 2.0 + static_cast<double>(cls % 4);
            const double axis = (cls % 2 == 0) ? static_cast<double>(x)
                                               : static_cast<double>(y);
            wave = std::sin(jitter * axis / period + phase);
          } else if (variant == "checker") {
            const double sx = std::sin(jitter * x * 0.9 + phase);
            const double sy = std::sin(jitter * y * 0.9 + phase);
            wave = (sx > 0) == (sy > 0) ? 1.0 : -1.0;
          } else if (variant == "rings") {
            const double dx = static_cast<double>(x) - 15.5;
            const double dy = static_cast<double>(y) - 15.5;
            wave = std::sin(jitter * std::sqrt(dx * dx + dy * dy) + phase);
          } else {
            raise(ErrorCode::Config, "dataset '", spec.name,
                  "': unknown image variant '", variant, "'");
          }
          const double noise = rng.uniform(-0.5, 0.5);
          img[ch * 32 * 32 + y * 32 + x] = 0.5 + gain * wave + 0.1 * noise;
        }
      }
    }
  }
  return batch;
}

std::filesystem::path resolve_data_path(const std::string& raw) {
  std::filesystem::path p(raw);
  if (p.is_absolute() || std::filesystem::exists(p)) return p;
  if (const char* root = std::getenv("ATDKIT_DATA_ROOT")) {
    return std::filesystem::path(root) / p;
  }
  return p;
}

SampleBatch load_csv(const DatasetSpec& spec, const std::string& raw_path) {
  const std::filesystem::path path = resolve_data_path(raw_path);
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "dataset '", spec.name, "': cannot open ",
          path.string());
  const bool labeled = spec.params.value("labeled", true);

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0, rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      char* rest = nullptr;
      const double v = std::strtod(cell.c_str(), &rest);
      require(rest != cell.c_str(), ErrorCode::Io, "dataset '", spec.name,
              "': unparseable cell '", cell, "' at row ", rows);
      row.push_back(v);
    }
    if (labeled) {
      require(row.size() >= 2, ErrorCode::Io, "dataset '", spec.name,
              "': labeled rows need >= 2 columns");
      labels.push_back(static_cast<int>(row.back()));
      row.pop_back();
    }
    if (width == 0) width = row.size();
    require(row.size() == width, ErrorCode::Io, "dataset '", spec.name,
            "': ragged row at ", rows);
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  require(rows > 0, ErrorCode::Io, "dataset '", spec.name, "': no rows in ",
          path.string());

  SampleBatch batch;
  batch.inputs = Tensor({rows, width}, std::move(values));
  batch.labels = std::move(labels);
  batch.pixel_space = spec.params.value("pixel_space", false);
  return batch;
}

}  // namespace

SampleBatch load_dataset(const DatasetSpec& spec) {
  require(!spec.name.empty(), ErrorCode::Config, "dataset: missing name");
  SampleBatch batch;
  if (spec.source == "blobs") {
    batch = load_blobs(spec);
  } else if (spec.source == "rects") {
    batch = load_rects(spec);
  } else if (spec.source.rfind("toy:", 0) == 0) {
    batch = load_toy(spec);
  } else if (spec.source.rfind("images:", 0) == 0) {
    batch = load_images(spec);
  } else if (spec.source.rfind("csv:", 0) == 0) {
    batch = load_csv(spec, spec.source.substr(4));
  } else if (spec.source.rfind("fetch:", 0) == 0) {
    const std::string id = spec.source.substr(6);
    const char* root = std::getenv("ATDKIT_DATA_ROOT");
    require(root != nullptr, ErrorCode::Config, "dataset '", spec.name,
            "': fetch:", id, " needs ATDKIT_DATA_ROOT to be set");
    const std::filesystem::path path = std::filesystem::path(root) / (id + ".csv");
    require(std::filesystem::exists(path), ErrorCode::Io, "dataset '", spec.name,
            "': fetch id '", id, "' not found at ", path.string(),
            " (place the file there; no downloader is built in)");
    batch = load_csv(spec, path.string());
  } else {
    raise(ErrorCode::Config, "dataset '", spec.name, "': unknown source '",
          spec.source, "'");
  }
  finalize(batch, spec);
  return batch;
}

std::vector<SampleBatch> make_batches(const SampleBatch& data,
                                      std::size_t batch_size,
                                      RngStream* shuffle_rng) {
  require(batch_size > 0, ErrorCode::InvalidArgument,
          "make_batches: batch_size must be positive");
  std::vector<std::size_t> order = iota_indices(data.size());
  if (shuffle_rng) shuffle_rng->shuffle(order);
  std::vector<SampleBatch> out;
  for (std::size_t at = 0; at < order.size(); at += batch_size) {
    const std::size_t end = std::min(order.size(), at + batch_size);
    std::span<const std::size_t> idx(order.data() + at, end - at);
    SampleBatch b;
    b.name = data.name;
    b.role = data.role;
    b.pixel_space = data.pixel_space;
    b.inputs = data.inputs.take_rows(idx);
    for (std::size_t i : idx) {
      if (data.labeled()) b.labels.push_back(data.labels[i]);
      b.ids.push_back(data.ids.empty() ? "" : data.ids[i]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

// --- toy layouts ---

std::size_t ToyLayout::num_classes() const {
  int hi = -1;
  for (const Rect& r : in_rects) hi = std::max(hi, r.label);
  return static_cast<std::size_t>(hi + 1);
}

bool ToyLayout::inside_any_in(double x, double y, double margin) const {
  for (const Rect& r : in_rects) {
    if (x >= r.lo_x - margin && x <= r.hi_x + margin && y >= r.lo_y - margin &&
        y <= r.hi_y + margin) {
      return true;
    }
  }
  return false;
}

namespace {

bool overlap(const Rect& a, const Rect& b) {
  return a.lo_x <= b.hi_x && b.lo_x <= a.hi_x && a.lo_y <= b.hi_y &&
         b.lo_y <= a.hi_y;
}

Rect padded_bounds(const std::vector<Rect>& rects, double pad) {
  Rect f = rects[0];
  for (const Rect& r : rects) {
    f.lo_x = std::min(f.lo_x, r.lo_x);
    f.lo_y = std::min(f.lo_y, r.lo_y);
    f.hi_x = std::max(f.hi_x, r.hi_x);
    f.hi_y = std::max(f.hi_y, r.hi_y);
  }
  f.lo_x -= pad;
  f.lo_y -= pad;
  f.hi_x += pad;
  f.hi_y += pad;
  f.label = 0;
  return f;
}

}  // namespace

ToyLayout toy_layout(const std::string& name, double epsilon) {
  require(epsilon > 0.0, ErrorCode::Config, "toy layout: epsilon must be > 0");
  ToyLayout layout;
  layout.name = name;
  layout.epsilon = epsilon;
  if (name == "pair") {
    layout.in_rects = {{-1, -1, 1, 1, 0}};
    layout.out_rects = {{4, -1, 6, 1, 0}};
  } else if (name == "triad") {
    layout.in_rects = {{-6, -1, -4, 1, 0}, {-1, -1, 1, 1, 1}, {4, -1, 6, 1, 2}};
    layout.out_rects = {{-1, 4, 1, 6, 0}, {-1, -6, 1, -4, 0}};
  } else {
    raise(ErrorCode::Config, "toy layout: unknown layout '", name,
          "' (expected pair|triad)");
  }
  std::vector<Rect> all = layout.in_rects;
  all.insert(all.end(), layout.out_rects.begin(), layout.out_rects.end());
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      require(!overlap(all[i], all[j]), ErrorCode::Contract, "toy layout '",
              name, "': regions ", i, " and ", j, " overlap");
    }
  }
  layout.frame = padded_bounds(all, 2.0 * epsilon);
  return layout;
}

SampleBatch sample_in_rects(const ToyLayout& layout, std::size_t n_per_rect,
                            std::uint64_t seed, const std::string& name,
                            Role role) {
  RngStream rng = RngStream::derive(seed, "toy-in");
  SampleBatch batch = sample_rect_set(layout.in_rects, n_per_rect, rng, true);
  batch.name = name;
  batch.role = role;
  batch.ids.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch.ids[i] = name + "#" + std::to_string(i);
  }
  return batch;
}

SampleBatch sample_out_rects(const ToyLayout& layout, std::size_t n_per_rect,
                             std::uint64_t seed, const std::string& name,
                             Role role) {
  RngStream rng = RngStream::derive(seed, "toy-out");
  SampleBatch batch = sample_rect_set(layout.out_rects, n_per_rect, rng, false);
  batch.name = name;
  batch.role = role;
  batch.ids.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch.ids[i] = name + "#" + std::to_string(i);
  }
  return batch;
}

ToyResampler::ToyResampler(ToyLayout layout, std::uint64_t seed)
    : layout_(std::move(layout)), rng_(RngStream::derive(seed, "toy-resample")) {}

Tensor ToyResampler::sample(std::size_t n) {
  ++calls_;
  const double margin = 1.5 * layout_.epsilon;
  Tensor out({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    for (int tries = 0;; ++tries) {
      require(tries < 10000, ErrorCode::Numeric,
              "toy resampler: rejection sampling starved (frame almost "
              "covered by dilated in-regions)");
      const double x = rng_.uniform(layout_.frame.lo_x, layout_.frame.hi_x);
      const double y = rng_.uniform(layout_.frame.lo_y, layout_.frame.hi_y);
      if (!layout_.inside_any_in(x, y, margin)) {
        out.row(i)[0] = x;
        out.row(i)[1] = y;
        break;
      }
    }
  }
  return out;
}

}  // namespace atdkit
