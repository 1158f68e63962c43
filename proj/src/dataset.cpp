#include "pros/dataset.hpp"

#include "pros/error.hpp"
#include "pros/series.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace pros {

  static_assert(std::endian::native == std::endian::little, "raw dataset files are little-endian float32");

  Dataset::Dataset(std::size_t length, std::vector<float> values, std::vector<std::int32_t> labels)
      : length_(length), values_(std::move(values)), labels_(std::move(labels)) {
    require(length_ >= 1, "dataset series length must be positive");
    require(values_.size() % length_ == 0, "dataset value count is not a multiple of the series length");
    count_ = values_.size() / length_;
    require(labels_.empty() || labels_.size() == count_, "label count must equal the series count");
  }

  std::vector<double> Dataset::series_as_double(std::size_t id) const {
    const auto s = series(id);
    return {s.begin(), s.end()};
  }

  std::size_t Dataset::class_count() const noexcept {
    if (labels_.empty()) { return 0; }
    return static_cast<std::size_t>(*std::max_element(labels_.begin(), labels_.end())) + 1;
  }

  nlohmann::json DatasetDescriptor::to_json(const std::filesystem::path& relative_to) const {
    auto rel = [&](const std::filesystem::path& p) {
      return std::filesystem::relative(std::filesystem::absolute(p), std::filesystem::absolute(relative_to)).string();
    };
    nlohmann::json j;
    j["raw"] = rel(raw_path);
    j["n"] = count;
    j["len"] = length;
    j["labels"] = label_path ? nlohmann::json(rel(*label_path)) : nlohmann::json(nullptr);
    j["normalized"] = normalized;
    j["provenance"] = provenance;
    return j;
  }

  DatasetDescriptor DatasetDescriptor::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    DatasetDescriptor d;
    try {
      d.raw_path = base_dir / j.at("raw").get<std::string>();
      d.count = j.at("n").get<std::size_t>();
      d.length = j.at("len").get<std::size_t>();
      if (j.contains("labels") && !j.at("labels").is_null()) {
        d.label_path = base_dir / j.at("labels").get<std::string>();
      }
      d.normalized = j.value("normalized", true);
      d.provenance = j.value("provenance", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("bad dataset descriptor: ") + e.what());
    }
    return d;
  }

  std::filesystem::path descriptor_path_for(const std::filesystem::path& raw_path) {
    return std::filesystem::path(raw_path.string() + ".json");
  }

  void save_descriptor(const DatasetDescriptor& descriptor, const std::filesystem::path& json_path) {
    std::ofstream out(json_path);
    if (!out) { throw IoError("cannot write descriptor " + json_path.string()); }
    auto base = json_path.parent_path();
    if (base.empty()) { base = "."; }
    out << descriptor.to_json(base).dump(2) << '\n';
    if (!out) { throw IoError("failed writing descriptor " + json_path.string()); }
  }

  DatasetDescriptor load_descriptor(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) { throw IoError("cannot open descriptor " + json_path.string()); }
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("descriptor " + json_path.string() + " is not valid JSON: " + e.what());
    }
    auto base = json_path.parent_path();
    if (base.empty()) { base = "."; }
    auto d = DatasetDescriptor::from_json(j, base);
    validate_descriptor(d);
    return d;
  }

  void validate_descriptor(const DatasetDescriptor& d) {
    if (d.count == 0 || d.length == 0) { throw IoError("descriptor has zero series count or length"); }
    std::error_code ec;
    const auto size = std::filesystem::file_size(d.raw_path, ec);
    if (ec) { throw IoError("cannot stat raw file " + d.raw_path.string()); }
    const auto expected = static_cast<std::uintmax_t>(4) * d.count * d.length;
    if (size != expected) {
      throw IoError("raw file " + d.raw_path.string() + " has " + std::to_string(size) + " bytes, descriptor implies " +
                    std::to_string(expected));
    }
  }

  DatasetDescriptor write_dataset(const Dataset& dataset, const std::filesystem::path& raw_path,
                                  nlohmann::json provenance, bool normalized) {
    {
      std::ofstream out(raw_path, std::ios::binary | std::ios::trunc);
      if (!out) { throw IoError("cannot write raw file " + raw_path.string()); }
      const auto& v = dataset.values();
      out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
      if (!out) { throw IoError("failed writing raw file " + raw_path.string()); }
    }
    DatasetDescriptor d;
    d.raw_path = raw_path;
    d.count = dataset.size();
    d.length = dataset.length();
    d.normalized = normalized;
    d.provenance = std::move(provenance);
    if (dataset.has_labels()) {
      const std::filesystem::path label_path = raw_path.string() + ".labels";
      std::ofstream out(label_path, std::ios::trunc);
      if (!out) { throw IoError("cannot write label file " + label_path.string()); }
      for (auto l : dataset.labels()) { out << l << '\n'; }
      if (!out) { throw IoError("failed writing label file " + label_path.string()); }
      d.label_path = label_path;
    }
    save_descriptor(d, descriptor_path_for(raw_path));
    return d;
  }

  std::vector<float> read_series(const DatasetDescriptor& d, std::size_t id) {
    if (id >= d.count) {
      throw std::out_of_range("series id " + std::to_string(id) + " out of range (n = " + std::to_string(d.count) + ")");
    }
    std::ifstream in(d.raw_path, std::ios::binary);
    if (!in) { throw IoError("cannot open raw file " + d.raw_path.string()); }
    in.seekg(static_cast<std::streamoff>(id * d.length * sizeof(float)));
    std::vector<float> out(d.length);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(d.length * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(d.length * sizeof(float))) {
      throw IoError("short read for series " + std::to_string(id));
    }
    return out;
  }

  void stream_dataset(const DatasetDescriptor& d, const std::function<void(std::size_t, std::span<const float>)>& visit) {
    validate_descriptor(d);
    std::ifstream in(d.raw_path, std::ios::binary);
    if (!in) { throw IoError("cannot open raw file " + d.raw_path.string()); }
    std::vector<float> buf(d.length);
    const auto bytes = static_cast<std::streamsize>(d.length * sizeof(float));
    for (std::size_t id = 0; id < d.count; ++id) {
      in.read(reinterpret_cast<char*>(buf.data()), bytes);
      if (in.gcount() != bytes) { throw IoError("short read for series " + std::to_string(id)); }
      visit(id, buf);
    }
  }

  std::vector<std::int32_t> read_labels(const std::filesystem::path& path, std::size_t expected) {
    std::ifstream in(path);
    if (!in) { throw IoError("cannot open label file " + path.string()); }
    std::vector<std::int32_t> labels;
    labels.reserve(expected);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) { continue; }
      std::int32_t v = 0;
      std::istringstream ls(line);
      if (!(ls >> v) || v < 0) { throw IoError("bad label line '" + line + "' in " + path.string()); }
      labels.push_back(v);
    }
    if (labels.size() != expected) {
      throw IoError("label file " + path.string() + " has " + std::to_string(labels.size()) + " lines, expected " +
                    std::to_string(expected));
    }
    return labels;
  }

  Dataset load_dataset(const DatasetDescriptor& d) {
    validate_descriptor(d);
    std::vector<float> values(d.count * d.length);
    std::ifstream in(d.raw_path, std::ios::binary);
    if (!in) { throw IoError("cannot open raw file " + d.raw_path.string()); }
    const auto bytes = static_cast<std::streamsize>(values.size() * sizeof(float));
    in.read(reinterpret_cast<char*>(values.data()), bytes);
    if (in.gcount() != bytes) { throw IoError("short read on " + d.raw_path.string()); }
    std::vector<std::int32_t> labels;
    if (d.label_path) { labels = read_labels(*d.label_path, d.count); }
    return Dataset(d.length, std::move(values), std::move(labels));
  }

  std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    // splitmix64 finalizer over a mixed (seed, index) pair.
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::vector<double> random_walk_raw(std::size_t length, std::uint64_t seed, std::uint64_t index) {
    std::mt19937_64 rng(derive_seed(seed, index));
    std::normal_distribution<double> step(0.0, 1.0);
    std::vector<double> out(length);
    double acc = 0;
    for (auto& v : out) {
      acc += step(rng);
      v = acc;
    }
    return out;
  }

  namespace {

    void append_normalized(std::vector<float>& values, const std::vector<double>& raw) {
      if (raw.size() < 2) {
        for (double v : raw) { values.push_back(static_cast<float>(v)); }
        return;
      }
      for (double v : z_normalize(raw)) { values.push_back(static_cast<float>(v)); }
    }

  } // namespace

  Dataset make_random_walk(std::size_t count, std::size_t length, std::uint64_t seed) {
    require(count >= 1 && length >= 1, "random walk: n and length must be at least 1");
    std::vector<float> values;
    values.reserve(count * length);
    for (std::size_t i = 0; i < count; ++i) { append_normalized(values, random_walk_raw(length, seed, i)); }
    return Dataset(length, std::move(values));
  }

  std::vector<double> cbf_raw(CbfClass cls, std::size_t length, double amplitude, std::uint64_t seed,
                              std::uint64_t index) {
    // Saito's shapes scaled to the series length: onset a ~ U[l/8, l/4], duration b-a ~ U[l/4, 3l/4].
    // Shape magnitude is amplitude * (1 + eta/6), eta ~ N(0,1); noise is N(0,1) per point.
    std::mt19937_64 rng(derive_seed(seed ^ 0xCBF0CBF0ULL, index));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto l = static_cast<long>(length);
    std::uniform_int_distribution<long> onset(std::max(0L, l / 8), std::max(0L, l / 4));
    std::uniform_int_distribution<long> duration(std::max(1L, l / 4), std::max(1L, 3 * l / 4));
    const long a = onset(rng);
    const long b = std::min(l - 1, a + duration(rng));
    const double magnitude = amplitude * (1.0 + gauss(rng) / 6.0);
    std::vector<double> out(length);
    const double span = static_cast<double>(std::max(1L, b - a));
    for (long t = 0; t < l; ++t) {
      double shape = 0;
      if (t >= a && t <= b) {
        switch (cls) {
          case CbfClass::cylinder: shape = 1.0; break;
          case CbfClass::bell: shape = static_cast<double>(t - a) / span; break;
          case CbfClass::funnel: shape = static_cast<double>(b - t) / span; break;
        }
      }
      out[static_cast<std::size_t>(t)] = magnitude * shape + gauss(rng);
    }
    return out;
  }

  Dataset make_cbf(std::size_t count, std::size_t length, const CbfParams& params, std::uint64_t seed) {
    require(count >= 1 && length >= 2, "cbf: n >= 1 and length >= 2 required");
    require(params.amplitude > 0, "cbf: amplitude must be positive");
    double total = 0;
    for (double p : params.class_probs) {
      require(p >= 0 && std::isfinite(p), "cbf: class probabilities must be non-negative");
      total += p;
    }
    require(std::abs(total - 1.0) < 1e-9, "cbf: class probabilities must sum to 1");
    std::vector<float> values;
    values.reserve(count * length);
    std::vector<std::int32_t> labels(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::mt19937_64 rng(derive_seed(seed, i));
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      std::int32_t cls = 0;
      double cum = 0;
      for (std::int32_t c = 0; c < 3; ++c) {
        const double p = params.class_probs[static_cast<std::size_t>(c)];
        if (p == 0.0) { continue; }
        cls = c;
        cum += p;
        if (u < cum) { break; }
      }
      labels[i] = cls;
      append_normalized(values, cbf_raw(static_cast<CbfClass>(cls), length, params.amplitude, seed, i));
    }
    return Dataset(length, std::move(values), std::move(labels));
  }

  DatasetDescriptor generate_random_walk(const std::filesystem::path& raw_path, std::size_t count, std::size_t length,
                                         std::uint64_t seed) {
    const auto ds = make_random_walk(count, length, seed);
    nlohmann::json prov{{"kind", "random_walk"}, {"seed", seed}, {"n", count}, {"len", length}};
    return write_dataset(ds, raw_path, prov, true);
  }

  DatasetDescriptor generate_cbf(const std::filesystem::path& raw_path, std::size_t count, std::size_t length,
                                 const CbfParams& params, std::uint64_t seed) {
    const auto ds = make_cbf(count, length, params, seed);
    nlohmann::json prov{{"kind", "cbf"},
                        {"seed", seed},
                        {"n", count},
                        {"len", length},
                        {"amplitude", params.amplitude},
                        {"class_probs", params.class_probs}};
    return write_dataset(ds, raw_path, prov, true);
  }

  PoolSplit sample_pools(std::size_t dataset_size, std::size_t witness_pool_size, std::size_t query_pool_size,
                         std::uint64_t seed) {
    if (witness_pool_size + query_pool_size > dataset_size) {
      throw InvalidArgument("pools of " + std::to_string(witness_pool_size) + " + " + std::to_string(query_pool_size) +
                            " series do not fit in a dataset of " + std::to_string(dataset_size));
    }
    std::vector<std::uint32_t> ids(dataset_size);
    std::iota(ids.begin(), ids.end(), 0U);
    std::mt19937_64 rng(derive_seed(seed, 0x9001));
    // Partial Fisher-Yates: only the first w + q positions are needed.
    const std::size_t need = witness_pool_size + query_pool_size;
    for (std::size_t i = 0; i < need; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, dataset_size - 1);
      std::swap(ids[i], ids[pick(rng)]);
    }
    PoolSplit out;
    out.witness_pool.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(witness_pool_size));
    out.query_pool.assign(ids.begin() + static_cast<std::ptrdiff_t>(witness_pool_size),
                          ids.begin() + static_cast<std::ptrdiff_t>(need));
    std::sort(out.witness_pool.begin(), out.witness_pool.end());
    std::sort(out.query_pool.begin(), out.query_pool.end());
    return out;
  }

  namespace {

    std::vector<std::size_t> shuffled_positions(std::size_t n, std::mt19937_64& rng) {
      std::vector<std::size_t> pos(n);
      std::iota(pos.begin(), pos.end(), std::size_t{0});
      for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(pos[i - 1], pos[pick(rng)]);
      }
      return pos;
    }

  } // namespace

  RepetitionDraw draw_repetition(const PoolSplit& pools, std::size_t n_w, std::size_t n_r, std::size_t n_t,
                                 std::uint64_t seed, std::size_t repetition) {
    if (n_w > pools.witness_pool.size()) {
      throw InvalidArgument("witness pool exhausted: need " + std::to_string(n_w) + ", pool has " +
                            std::to_string(pools.witness_pool.size()));
    }
    if (n_r + n_t > pools.query_pool.size()) {
      throw InvalidArgument("query pool exhausted: need " + std::to_string(n_r + n_t) + ", pool has " +
                            std::to_string(pools.query_pool.size()));
    }
    std::mt19937_64 rng(derive_seed(seed, 0x5EED0000ULL + repetition));
    RepetitionDraw d;
    auto w = shuffled_positions(pools.witness_pool.size(), rng);
    d.witnesses.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n_w));
    auto q = shuffled_positions(pools.query_pool.size(), rng);
    d.training.assign(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(n_r));
    d.testing.assign(q.begin() + static_cast<std::ptrdiff_t>(n_r), q.begin() + static_cast<std::ptrdiff_t>(n_r + n_t));
    return d;
  }

  std::vector<std::uint32_t> ids_outside_pools(const PoolSplit& pools, std::size_t dataset_size) {
    std::vector<char> taken(dataset_size, 0);
    for (auto id : pools.witness_pool) { taken[id] = 1; }
    for (auto id : pools.query_pool) { taken[id] = 1; }
    std::vector<std::uint32_t> out;
    out.reserve(dataset_size);
    for (std::size_t i = 0; i < dataset_size; ++i) {
      if (!taken[i]) { out.push_back(static_cast<std::uint32_t>(i)); }
    }
    return out;
  }

} // namespace pros
