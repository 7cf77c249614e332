// __BEGIN_LICENSE__
//  Copyright (c) 2026, the satstereo authors.
//
//  Licensed under the Apache License, Version 2.0 (the "License"); you may
//  not use this file except in compliance with the License. You may obtain a
//  copy of the License at http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.
// __END_LICENSE__

#include "satstereo/net/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

namespace satstereo::net {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument(msg);
}

}  // namespace

std::vector<ScheduleStage> named_schedule(const std::string& name) {
  if (name == "traditional") return {{"sceneflow", 20, 1e-3}, {"kitti", 100, 1e-3}, {"satellite_small", 10, 1e-3}};
  if (name == "full") return {{"sceneflow", 20, 1e-3}, {"satellite_all", 20, 1e-3}};
  if (name == "mixed") return {{"mixed", 20, 1e-3}};
  throw InvalidArgument("unknown schedule " + name);
}

void TrainConfig::validate() const {
  require(learning_rate >= 0.0, "learning_rate must be non-negative");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam betas must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  require(!loss_weights.empty(), "loss_weights is empty");
  require(batch_size >= 1, "batch_size must be positive");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : c.schedule)
    stages.push_back({{"dataset", s.dataset}, {"epochs", s.epochs}, {"learning_rate", s.learning_rate}});
  j = nlohmann::json{{"learning_rate", c.learning_rate}, {"adam_beta1", c.adam_beta1}, {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},           {"loss_weights", c.loss_weights}, {"batch_size", c.batch_size},
                     {"seed", c.seed},                   {"schedule", stages}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  d.learning_rate = j.value("learning_rate", d.learning_rate);
  d.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  d.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  d.adam_eps = j.value("adam_eps", d.adam_eps);
  d.loss_weights = j.value("loss_weights", d.loss_weights);
  d.batch_size = j.value("batch_size", d.batch_size);
  d.seed = j.value("seed", d.seed);
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    if (s.is_string()) {
      d.schedule = named_schedule(s.get<std::string>());
    } else {
      for (const auto& e : s)
        d.schedule.push_back({e.at("dataset").get<std::string>(), e.at("epochs").get<std::size_t>(),
                              e.value("learning_rate", d.learning_rate)});
    }
  }
  d.validate();
  c = std::move(d);
}

double weighted_total_loss(double l0, double l1, double l2) { return 0.5 * l0 + 0.7 * l1 + l2; }

template <class T>
void Adam<T>::step(const std::vector<Var<T>>& params, T lr) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p->value.size(), T(0));
      v_.emplace_back(p->value.size(), T(0));
    }
  }
  require(m_.size() == params.size(), "Adam: parameter list changed between steps");
  ++t_;
  const T t = static_cast<T>(t_);
  const T alpha = lr * std::sqrt(T(1) - std::pow(beta2_, t)) / (T(1) - std::pow(beta1_, t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k]->value.data;
    const auto& g = params[k]->grad.data;
    require(m_[k].size() == p.size(), "Adam: parameter size changed between steps");
    const bool has_grad = g.size() == p.size();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T gi = has_grad ? g[i] : T(0);
      m_[k][i] += (gi - m_[k][i]) * (T(1) - beta1_);
      v_[k][i] += (gi * gi - v_[k][i]) * (T(1) - beta2_);
      p[i] -= m_[k][i] * alpha / (std::sqrt(v_[k][i]) + eps_);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

Tensor<float> image_tensor(const ImageF& img) {
  return Tensor<float>(Shape{1, 1, img.rows(), img.cols()}, img.data());
}

namespace {

// Training mask: valid, finite, inside [0, D).
std::vector<std::uint8_t> loss_mask(const DisparityMap& gt, float max_d) {
  std::vector<std::uint8_t> m(gt.values.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    const float d = gt.values.data()[k];
    m[k] = gt.valid.data()[k] && std::isfinite(d) && d >= 0.0f && d < max_d;
  }
  return m;
}

bool any_set(const std::vector<std::uint8_t>& m) {
  return std::any_of(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; });
}

// Forward one tile; returns the per-hourglass losses and their weighted sum.
std::pair<std::vector<Var<float>>, Var<float>> tile_loss(const StereoNet& net, const dataset::StereoTile& tile,
                                                         const std::vector<std::uint8_t>& mask,
                                                         const std::vector<float>& weights) {
  require(tile.left.rows() == tile.gt.rows() && tile.left.cols() == tile.gt.cols(), "training tile: gt size mismatch");
  const auto out = net.forward(leaf(image_tensor(tile.left)), leaf(image_tensor(tile.right)));
  const Tensor<float> target(Shape{1, tile.gt.rows(), tile.gt.cols()}, tile.gt.values.data());
  std::vector<Var<float>> losses;
  for (const auto& d : out.disparities) losses.push_back(smooth_l1(d, target, mask, 1.0f));
  auto total = weighted_sum(losses, weights);
  return {std::move(losses), std::move(total)};
}

}  // namespace

LossRecord train_step(StereoNet& net, Adam<float>& opt, std::span<const dataset::StereoTile> batch,
                      const TrainConfig& cfg, double learning_rate, std::size_t step) {
  require(!batch.empty(), "train_step: empty batch");
  const std::size_t hg = net.config().hourglass_count;
  require(cfg.loss_weights.size() == hg, "train_step: one loss weight per hourglass output is required");
  const float max_d = static_cast<float>(net.config().max_disparity);

  // Items without usable ground truth do not contribute.
  std::vector<std::size_t> usable;
  std::vector<std::vector<std::uint8_t>> masks(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    masks[i] = loss_mask(batch[i].gt, max_d);
    if (any_set(masks[i])) usable.push_back(i);
  }
  require(!usable.empty(), "train_step: no valid ground truth in batch");

  net.params().zero_grad();
  LossRecord rec;
  rec.step = step;
  rec.losses.assign(hg, 0.0);
  const double inv = 1.0 / static_cast<double>(usable.size());
  std::vector<float> weights(hg);
  for (std::size_t k = 0; k < hg; ++k) weights[k] = static_cast<float>(cfg.loss_weights[k] * inv);
  for (auto i : usable) {
    auto [losses, total] = tile_loss(net, batch[i], masks[i], weights);
    for (std::size_t k = 0; k < hg; ++k) rec.losses[k] += losses[k]->value.data[0] * inv;
    rec.total += total->value.data[0];
    if (!std::isfinite(total->value.data[0])) throw Diverged("training loss is not finite", step);
    backward(total);
  }
  opt.step(net.params().vars(), static_cast<float>(learning_rate));
  return rec;
}

LossRecord evaluate_loss(const StereoNet& net, std::span<const dataset::StereoTile> tiles, const TrainConfig& cfg) {
  const std::size_t hg = net.config().hourglass_count;
  require(cfg.loss_weights.size() == hg, "evaluate_loss: one loss weight per hourglass output is required");
  NoGradGuard guard;
  std::vector<float> weights(cfg.loss_weights.begin(), cfg.loss_weights.end());
  LossRecord rec;
  rec.losses.assign(hg, 0.0);
  std::size_t used = 0;
  for (const auto& t : tiles) {
    const auto mask = loss_mask(t.gt, static_cast<float>(net.config().max_disparity));
    if (!any_set(mask)) continue;
    auto [losses, total] = tile_loss(net, t, mask, weights);
    for (std::size_t k = 0; k < hg; ++k) rec.losses[k] += losses[k]->value.data[0];
    rec.total += total->value.data[0];
    ++used;
  }
  require(used > 0, "evaluate_loss: no valid ground truth");
  for (auto& l : rec.losses) l /= static_cast<double>(used);
  rec.total /= static_cast<double>(used);
  return rec;
}

std::vector<LossRecord> train(StereoNet& net, std::span<const dataset::StereoTile> tiles, const TrainConfig& cfg,
                              std::size_t steps, const StepCallback& cb) {
  cfg.validate();
  require(!tiles.empty(), "train: no tiles");
  Adam<float> opt(static_cast<float>(cfg.adam_beta1), static_cast<float>(cfg.adam_beta2),
                  static_cast<float>(cfg.adam_eps));
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(tiles.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<LossRecord> trace;
  std::size_t cursor = 0;
  std::vector<dataset::StereoTile> batch;
  for (std::size_t s = 0; s < steps; ++s) {
    batch.clear();
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        cursor = 0;
        std::shuffle(order.begin(), order.end(), rng);
      }
      batch.push_back(tiles[order[cursor++]]);
    }
    trace.push_back(train_step(net, opt, batch, cfg, cfg.learning_rate, s));
    if (cb) cb(trace.back());
  }
  return trace;
}

std::vector<LossRecord> train_schedule(StereoNet& net,
                                       const std::map<std::string, std::vector<dataset::StereoTile>>& datasets,
                                       const TrainConfig& cfg, const StepCallback& cb) {
  cfg.validate();
  require(!cfg.schedule.empty(), "train_schedule: empty schedule");
  Adam<float> opt(static_cast<float>(cfg.adam_beta1), static_cast<float>(cfg.adam_beta2),
                  static_cast<float>(cfg.adam_eps));
  std::mt19937_64 rng(cfg.seed);
  std::vector<LossRecord> trace;
  std::size_t step = 0;
  for (const auto& stage : cfg.schedule) {
    auto it = datasets.find(stage.dataset);
    require(it != datasets.end() && !it->second.empty(), "train_schedule: no tiles for dataset " + stage.dataset);
    const auto& tiles = it->second;
    std::vector<std::size_t> order(tiles.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t e = 0; e < stage.epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        std::vector<dataset::StereoTile> batch;
        for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) batch.push_back(tiles[order[k]]);
        trace.push_back(train_step(net, opt, batch, cfg, stage.learning_rate, step++));
        if (cb) cb(trace.back());
      }
    }
  }
  return trace;
}

std::vector<dataset::StereoTile> random_dot_tiles(std::size_t count, std::size_t rows, std::size_t cols,
                                                  std::size_t max_disparity, std::uint64_t seed,
                                                  std::size_t dot_size) {
  require(dot_size >= 1, "random_dot_tiles: dot_size must be positive");
  require(rows >= 4 && cols >= 4, "random_dot_tiles: tiles too small");
  require(max_disparity >= 4 && max_disparity < cols, "random_dot_tiles: max_disparity must lie in [4, cols)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dot(0.0f, 1.0f);
  const int dmax = static_cast<int>(max_disparity) - 1;
  std::vector<dataset::StereoTile> out;
  for (std::size_t n = 0; n < count; ++n) {
    const int bg = std::uniform_int_distribution<int>(1, std::max(1, dmax / 2 - 1))(rng);
    const int fg = std::uniform_int_distribution<int>(std::min(dmax, bg + 2), dmax)(rng);
    const std::size_t r0 = std::uniform_int_distribution<std::size_t>(0, rows / 2)(rng);
    const std::size_t c0 = std::uniform_int_distribution<std::size_t>(0, cols / 2)(rng);
    const std::size_t r1 = std::uniform_int_distribution<std::size_t>(r0 + 2, rows)(rng);
    const std::size_t c1 = std::uniform_int_distribution<std::size_t>(c0 + 2, cols)(rng);

    dataset::StereoTile t;
    t.left = ImageF(rows, cols);
    t.right = ImageF(rows, cols);
    t.gt = DisparityMap(rows, cols);
    for (std::size_t y = 0; y < rows; y += dot_size)
      for (std::size_t x = 0; x < cols; x += dot_size) {
        const float v = dot(rng);
        for (std::size_t yy = y; yy < std::min(rows, y + dot_size); ++yy)
          for (std::size_t xx = x; xx < std::min(cols, x + dot_size); ++xx) t.left(yy, xx) = v;
      }
    ImageF depth(rows, cols, -1.0f);
    for (std::size_t y = 0; y < rows; ++y) {
      for (std::size_t x = 0; x < cols; ++x) {
        const bool inside = y >= r0 && y < r1 && x >= c0 && x < c1;
        const int d = inside ? fg : bg;
        t.gt.values(y, x) = static_cast<float>(d);
        t.gt.valid(y, x) = 1;
        const long xr = static_cast<long>(x) - d;
        if (xr < 0) continue;
        // Nearer surfaces (larger disparity) occlude farther ones.
        if (static_cast<float>(d) > depth(y, static_cast<std::size_t>(xr))) {
          depth(y, static_cast<std::size_t>(xr)) = static_cast<float>(d);
          t.right(y, static_cast<std::size_t>(xr)) = t.left(y, x);
        }
      }
    }
    for (std::size_t i = 0; i < depth.size(); ++i) {
      if (depth.data()[i] < 0.0f) t.right.data()[i] = dot(rng);
    }
    t.left = dataset::normalize_image(t.left);
    t.right = dataset::normalize_image(t.right);
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

ImageF pad_edge(const ImageF& img, std::size_t rows, std::size_t cols) {
  ImageF out(rows, cols);
  for (std::size_t y = 0; y < rows; ++y)
    for (std::size_t x = 0; x < cols; ++x) out(y, x) = img(std::min(y, img.rows() - 1), std::min(x, img.cols() - 1));
  return out;
}

std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

}  // namespace

InferResult infer_disparity(const StereoNet& net, const ImageF& left, const ImageF& right) {
  require(left.rows() == right.rows() && left.cols() == right.cols(), "infer_disparity: image sizes differ");
  require(left.size() > 0, "infer_disparity: empty image");
  const auto& cfg = net.config();
  InferResult res;
  res.padded_rows = std::max<std::size_t>(round_up(left.rows(), 16), 16);
  res.padded_cols = std::max(round_up(left.cols(), 16), round_up(cfg.max_disparity, 16));
  if (cfg.pooling == PoolingMode::spp) {
    for (auto p : cfg.spp_pool_sizes) {
      res.padded_rows = std::max(res.padded_rows, round_up(4 * p, 16));
      res.padded_cols = std::max(res.padded_cols, round_up(4 * p, 16));
    }
  }
  cfg.validate_input(res.padded_rows, res.padded_cols);
  const auto l = pad_edge(dataset::normalize_image(left), res.padded_rows, res.padded_cols);
  const auto r = pad_edge(dataset::normalize_image(right), res.padded_rows, res.padded_cols);
  NoGradGuard guard;
  const auto out = net.forward(leaf(image_tensor(l)), leaf(image_tensor(r)));
  for (const auto& head : out.disparities) {
    DisparityMap d(left.rows(), left.cols());
    for (std::size_t y = 0; y < left.rows(); ++y)
      for (std::size_t x = 0; x < left.cols(); ++x) {
        d.values(y, x) = head->value.data[y * res.padded_cols + x];
        d.valid(y, x) = 1;
      }
    res.regressions.push_back(std::move(d));
  }
  res.disparity = res.regressions.back();
  res.cost = out.costs.back()->value;
  return res;
}

namespace {

constexpr char kMagic[5] = {'O', 'S', 'T', 'N', '1'};
static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <class U>
void put(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <class U>
U get(std::istream& is) {
  U v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(U))) throw FormatError("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.entries().size()));
  for (const auto& [name, var] : params.entries()) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(var->value.rank()));
    for (auto e : var->value.shape) put<std::uint64_t>(os, e);
    os.write(reinterpret_cast<const char*>(var->value.data.data()),
             static_cast<std::streamsize>(var->value.size() * sizeof(float)));
  }
  if (!os) throw Error("failed writing " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, ParameterStore& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("checkpoint: bad magic in " + path.string());
  const auto count = get<std::uint32_t>(is);
  if (count != params.entries().size()) throw FormatError("checkpoint: parameter count mismatch");
  std::vector<std::pair<Var<float>, std::vector<float>>> staged;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(is);
    if (len > 4096) throw FormatError("checkpoint: implausible name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw FormatError("checkpoint: truncated file");
    if (!params.contains(name)) throw FormatError("checkpoint: unknown parameter " + name);
    if (!seen.insert(name).second) throw FormatError("checkpoint: duplicate parameter " + name);
    const auto& var = params.get(name);
    const auto rank = get<std::uint32_t>(is);
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(get<std::uint64_t>(is));
    if (shape != var->value.shape)
      throw FormatError("checkpoint: shape of " + name + " is " + to_string(shape) + ", expected " +
                        to_string(var->value.shape));
    std::vector<float> data(var->value.size());
    if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float))))
      throw FormatError("checkpoint: truncated file");
    staged.emplace_back(var, std::move(data));
  }
  for (auto& [var, data] : staged) var->value.data = std::move(data);
}

}  // namespace satstereo::net
