#include "pros/index.hpp"

#include "pros/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace pros {

  std::string to_string(IndexKind kind) { return kind == IndexKind::isax ? "isax" : "dstree"; }

  IndexKind parse_index_kind(const std::string& text) {
    if (text == "isax") { return IndexKind::isax; }
    if (text == "dstree") { return IndexKind::dstree; }
    throw InvalidArgument("index kind must be 'isax' or 'dstree', got '" + text + "'");
  }

  namespace {

    double value_gap_sq(double value, double low, double high) noexcept {
      if (value > high) { return (value - high) * (value - high); }
      if (value < low) { return (low - value) * (low - value); }
      return 0.0;
    }

    // Gap between the query band [lower_hat, upper_hat] and the node interval [low, high].
    double band_gap_sq(double lower_hat, double upper_hat, double low, double high) noexcept {
      if (low > upper_hat) { return (low - upper_hat) * (low - upper_hat); }
      if (high < lower_hat) { return (lower_hat - high) * (lower_hat - high); }
      return 0.0;
    }

    unsigned bits_for(std::uint32_t cardinality) {
      for (unsigned b = 1; b <= 8; ++b) {
        if ((1U << b) == cardinality) { return b; }
      }
      throw InvalidArgument("sax_max_cardinality must be a power of two in [2, 256]");
    }

    struct Builder {
      const Dataset& ds;
      const IndexConfig& cfg;
      std::vector<std::size_t> endpoints;
      std::size_t segments = 0;
      std::vector<double> means;          // per dataset id, M values
      std::vector<double> stdevs;         // dstree only
      std::vector<std::uint8_t> symbols;  // isax only, 8-bit symbols
      std::vector<IndexNode> nodes;
      unsigned max_bits = 8;

      Builder(const Dataset& d, const IndexConfig& c) : ds(d), cfg(c) {}

      void summarize(std::span<const std::uint32_t> ids) {
        const std::size_t m = segments;
        means.assign(ds.size() * m, 0.0);
        if (cfg.kind == IndexKind::dstree) { stdevs.assign(ds.size() * m, 0.0); }
        if (cfg.kind == IndexKind::isax) { symbols.assign(ds.size() * m, 0); }
        for (auto id : ids) {
          const auto s = ds.series(id);
          const auto e = eapca(s, endpoints);
          for (std::size_t i = 0; i < m; ++i) {
            means[id * m + i] = e.means[i];
            if (cfg.kind == IndexKind::dstree) { stdevs[id * m + i] = e.stdevs[i]; }
            if (cfg.kind == IndexKind::isax) {
              symbols[id * m + i] = static_cast<std::uint8_t>(sax_symbol(e.means[i], kMaxSaxCardinality));
            }
          }
        }
      }

      std::uint32_t new_node(std::uint32_t parent) {
        nodes.emplace_back();
        nodes.back().parent = parent;
        return static_cast<std::uint32_t>(nodes.size() - 1);
      }

      void fill_dstree_synopsis(std::uint32_t n) {
        auto& syn = nodes[n].synopsis;
        const std::size_t m = segments;
        syn.kind = IndexKind::dstree;
        syn.low.assign(m, kInfinity);
        syn.high.assign(m, -kInfinity);
        syn.stdev_min.assign(m, kInfinity);
        syn.stdev_max.assign(m, -kInfinity);
        for (auto id : nodes[n].ids) {
          for (std::size_t i = 0; i < m; ++i) {
            const double mu = means[id * m + i];
            const double sd = stdevs[id * m + i];
            syn.low[i] = std::min(syn.low[i], mu);
            syn.high[i] = std::max(syn.high[i], mu);
            syn.stdev_min[i] = std::min(syn.stdev_min[i], sd);
            syn.stdev_max[i] = std::max(syn.stdev_max[i], sd);
          }
        }
      }

      void refresh_isax_interval(NodeSynopsis& syn, std::size_t seg) const {
        const unsigned bits = syn.sax_bits[seg];
        if (bits == 0) {
          syn.low[seg] = -kInfinity;
          syn.high[seg] = kInfinity;
          return;
        }
        const auto iv = sax_interval(syn.sax_symbols[seg], 1U << bits);
        syn.low[seg] = iv.low;
        syn.high[seg] = iv.high;
      }

      void build_isax(std::uint32_t n, std::size_t next_segment) {
        if (nodes[n].ids.size() <= cfg.leaf_threshold) { return; }
        const std::size_t m = segments;
        for (std::size_t attempt = 0; attempt < m; ++attempt) {
          const std::size_t seg = (next_segment + attempt) % m;
          const unsigned bits = nodes[n].synopsis.sax_bits[seg];
          if (bits >= max_bits) { continue; }
          const unsigned shift = 8U - bits - 1U;
          std::vector<std::uint32_t> zero;
          std::vector<std::uint32_t> one;
          for (auto id : nodes[n].ids) {
            ((symbols[id * m + seg] >> shift) & 1U ? one : zero).push_back(id);
          }
          if (zero.empty() || one.empty()) { continue; }
          nodes[n].split_segment = static_cast<std::int32_t>(seg);
          const NodeSynopsis parent_syn = nodes[n].synopsis;
          std::vector<std::uint32_t>* parts[2] = {&zero, &one};
          std::uint32_t kids[2];
          for (unsigned b = 0; b < 2; ++b) {
            kids[b] = new_node(n);
            auto& child = nodes[kids[b]];
            child.synopsis = parent_syn;
            child.synopsis.sax_symbols[seg] = static_cast<std::uint16_t>(parent_syn.sax_symbols[seg] * 2U + b);
            child.synopsis.sax_bits[seg] = static_cast<std::uint8_t>(bits + 1);
            refresh_isax_interval(child.synopsis, seg);
            child.ids = std::move(*parts[b]);
          }
          nodes[n].children = {kids[0], kids[1]};
          nodes[n].ids.clear();
          nodes[n].ids.shrink_to_fit();
          build_isax(kids[0], seg + 1);
          build_isax(kids[1], seg + 1);
          return;
        }
        // No segment separates these series: overflow leaf.
      }

      void build_dstree(std::uint32_t n) {
        fill_dstree_synopsis(n);
        if (nodes[n].ids.size() <= cfg.leaf_threshold) { return; }
        const std::size_t m = segments;
        const auto& syn = nodes[n].synopsis;
        std::size_t seg = 0;
        double widest = -1;
        for (std::size_t i = 0; i < m; ++i) {
          const double range = syn.high[i] - syn.low[i];
          if (range > widest) {
            widest = range;
            seg = i;
          }
        }
        if (!(widest > 0)) { return; }
        const double threshold = syn.low[seg] + (syn.high[seg] - syn.low[seg]) / 2;
        std::vector<std::uint32_t> left;
        std::vector<std::uint32_t> right;
        for (auto id : nodes[n].ids) { (means[id * m + seg] < threshold ? left : right).push_back(id); }
        if (left.empty() || right.empty()) { return; }
        nodes[n].split_segment = static_cast<std::int32_t>(seg);
        nodes[n].split_threshold = threshold;
        const std::uint32_t l = new_node(n);
        nodes[l].ids = std::move(left);
        const std::uint32_t r = new_node(n);
        nodes[r].ids = std::move(right);
        nodes[n].children = {l, r};
        nodes[n].ids.clear();
        nodes[n].ids.shrink_to_fit();
        build_dstree(l);
        build_dstree(r);
      }
    };

  } // namespace

  double mindist(const QuerySummary& q, const NodeSynopsis& node, const DistanceKind& distance) {
    const std::size_t m = q.endpoints.size();
    require(q.means.size() == m && node.low.size() == m && node.high.size() == m,
            "mindist: query summary layout does not match the node layout");
    require(distance.is_dtw() == q.envelope.has_value(), "mindist: envelope must be supplied iff distance is DTW");
    double acc = 0;
    if (node.kind == IndexKind::isax) {
      if (distance.is_dtw()) {
        const auto& env = *q.envelope;
        for (std::size_t i = 0; i < m; ++i) {
          acc += band_gap_sq(env.lower_hat[i], env.upper_hat[i], node.low[i], node.high[i]);
        }
      } else {
        for (std::size_t i = 0; i < m; ++i) { acc += value_gap_sq(q.means[i], node.low[i], node.high[i]); }
      }
      const double n = static_cast<double>(q.endpoints.back());
      return std::sqrt(n / static_cast<double>(m)) * std::sqrt(acc);
    }
    std::size_t prev = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto width = static_cast<double>(q.endpoints[i] - prev);
      prev = q.endpoints[i];
      if (distance.is_dtw()) {
        const auto& env = *q.envelope;
        acc += width * band_gap_sq(env.lower_hat[i], env.upper_hat[i], node.low[i], node.high[i]);
      } else {
        acc += width * value_gap_sq(q.means[i], node.low[i], node.high[i]);
      }
    }
    return std::sqrt(acc);
  }

  std::vector<std::uint32_t> IndexTree::leaves() const {
    std::vector<std::uint32_t> out;
    out.reserve(leaf_count_);
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].is_leaf()) { out.push_back(i); }
    }
    return out;
  }

  std::vector<std::uint32_t> IndexTree::indexed_ids() const {
    std::vector<std::uint32_t> out;
    out.reserve(indexed_count_);
    for (const auto& n : nodes_) {
      if (n.is_leaf()) { out.insert(out.end(), n.ids.begin(), n.ids.end()); }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::uint32_t> IndexTree::held_out_ids() const {
    const auto in = indexed_ids();
    std::vector<std::uint32_t> out;
    std::size_t j = 0;
    for (std::uint32_t id = 0; id < dataset_->size(); ++id) {
      if (j < in.size() && in[j] == id) {
        ++j;
      } else {
        out.push_back(id);
      }
    }
    return out;
  }

  QuerySummary IndexTree::summarize_query(std::span<const double> query, const DistanceKind& distance) const {
    require(query.size() == length_, "query length " + std::to_string(query.size()) + " does not match index length " +
                                         std::to_string(length_));
    QuerySummary q;
    q.endpoints = endpoints_;
    q.means = eapca(query, endpoints_).means;
    if (distance.is_dtw()) {
      require(distance.band_radius <= length_ - 1, "DTW band radius must be at most length - 1");
      const auto env = build_envelope(query, distance.band_radius);
      q.envelope = summarize_envelope_eapca(env, endpoints_);
    }
    return q;
  }

  double IndexTree::mindist(const QuerySummary& q, std::uint32_t node) const {
    return pros::mindist(q, nodes_[node].synopsis, q.envelope ? DistanceKind::dtw(0) : DistanceKind::euclidean());
  }

  IndexTree build_index(std::shared_ptr<const Dataset> dataset, const IndexConfig& config,
                        std::optional<std::span<const std::uint32_t>> subset) {
    require(dataset != nullptr && dataset->size() > 0, "build_index: dataset is empty");
    require(config.leaf_threshold >= 1, "build_index: leaf threshold must be at least 1");
    require(config.segment_count >= 1, "build_index: segment count must be at least 1");
    const std::size_t length = dataset->length();

    std::vector<std::uint32_t> ids;
    if (subset) {
      ids.assign(subset->begin(), subset->end());
      require(!ids.empty(), "build_index: id subset is empty");
      for (auto id : ids) { require(id < dataset->size(), "build_index: subset id out of range"); }
    } else {
      ids.resize(dataset->size());
      std::iota(ids.begin(), ids.end(), 0U);
    }

    Builder b(*dataset, config);
    b.segments = config.segment_count;
    if (config.kind == IndexKind::isax) {
      b.endpoints = equal_endpoints(length, config.segment_count);
      b.max_bits = bits_for(config.sax_max_cardinality);
    } else {
      b.endpoints = balanced_endpoints(length, config.segment_count);
    }
    b.summarize(ids);

    const std::uint32_t root = b.new_node(IndexNode::kNone);
    b.nodes[root].ids = std::move(ids);
    if (config.kind == IndexKind::isax) {
      auto& syn = b.nodes[root].synopsis;
      syn.kind = IndexKind::isax;
      syn.sax_symbols.assign(b.segments, 0);
      syn.sax_bits.assign(b.segments, 0);
      syn.low.assign(b.segments, -kInfinity);
      syn.high.assign(b.segments, kInfinity);
      b.build_isax(root, 0);
    } else {
      b.build_dstree(root);
    }

    IndexTree tree;
    tree.config_ = config;
    tree.length_ = length;
    tree.endpoints_ = std::move(b.endpoints);
    tree.nodes_ = std::move(b.nodes);
    tree.dataset_ = std::move(dataset);
    for (const auto& n : tree.nodes_) {
      if (n.is_leaf()) {
        ++tree.leaf_count_;
        tree.indexed_count_ += n.ids.size();
      }
    }
    return tree;
  }

  // ---------------------------------------------------------------------------------------------
  // Persistence

  namespace {

    class ByteWriter {
    public:
      template<typename T>
      void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
      }
      template<typename T>
      void put_vector(const std::vector<T>& v) {
        put<std::uint64_t>(v.size());
        for (const auto& x : v) { put<T>(x); }
      }
      std::vector<std::uint8_t>& bytes() { return bytes_; }

    private:
      std::vector<std::uint8_t> bytes_;
    };

    class ByteReader {
    public:
      explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

      template<typename T>
      T get() {
        if (pos_ + sizeof(T) > data_.size()) { throw IoError("index file truncated"); }
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
      }
      template<typename T>
      std::vector<T> get_vector() {
        const auto n = get<std::uint64_t>();
        if (n > (data_.size() - pos_) / sizeof(T)) { throw IoError("index file truncated (vector length)"); }
        std::vector<T> v(n);
        for (auto& x : v) { x = get<T>(); }
        return v;
      }
      [[nodiscard]] bool done() const noexcept { return pos_ == data_.size(); }

    private:
      std::span<const std::uint8_t> data_;
      std::size_t pos_ = 0;
    };

    std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
      uLong crc = crc32(0L, Z_NULL, 0);
      crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
      return static_cast<std::uint32_t>(crc);
    }

  } // namespace

  std::vector<std::uint8_t> serialize_index(const IndexTree& tree) {
    ByteWriter body;
    const auto& c = tree.config_;
    body.put<std::uint8_t>(static_cast<std::uint8_t>(c.kind));
    body.put<std::uint64_t>(c.segment_count);
    body.put<std::uint64_t>(c.leaf_threshold);
    body.put<std::uint32_t>(c.sax_max_cardinality);
    body.put<std::uint8_t>(static_cast<std::uint8_t>(c.distance.measure));
    body.put<std::uint64_t>(c.distance.band_radius);
    body.put<std::uint64_t>(tree.length_);
    body.put<std::uint64_t>(tree.dataset_->size());
    body.put_vector<std::uint64_t>({tree.endpoints_.begin(), tree.endpoints_.end()});
    body.put<std::uint64_t>(tree.nodes_.size());
    for (const auto& n : tree.nodes_) {
      body.put<std::uint32_t>(n.parent);
      body.put_vector(n.children);
      body.put_vector(n.ids);
      body.put<std::int32_t>(n.split_segment);
      body.put<double>(n.split_threshold);
      const auto& s = n.synopsis;
      if (c.kind == IndexKind::isax) {
        body.put_vector(s.sax_symbols);
        body.put_vector(s.sax_bits);
      } else {
        body.put_vector(s.low);
        body.put_vector(s.high);
        body.put_vector(s.stdev_min);
        body.put_vector(s.stdev_max);
      }
    }

    std::vector<std::uint8_t> out(std::begin(kIndexMagic), std::end(kIndexMagic));
    out.push_back(kIndexVersion);
    const auto& payload = body.bytes();
    const std::uint64_t size = payload.size();
    const auto* sp = reinterpret_cast<const std::uint8_t*>(&size);
    out.insert(out.end(), sp, sp + sizeof(size));
    out.insert(out.end(), payload.begin(), payload.end());
    const std::uint32_t crc = crc_of(out);
    const auto* cp = reinterpret_cast<const std::uint8_t*>(&crc);
    out.insert(out.end(), cp, cp + sizeof(crc));
    return out;
  }

  void save_index(const IndexTree& tree, const std::filesystem::path& path) {
    if (path.empty()) { throw IoError("save_index: empty path"); }
    const auto bytes = serialize_index(tree);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) { throw IoError("cannot write index file " + path.string()); }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) { throw IoError("failed writing index file " + path.string()); }
  }

  IndexTree load_index(const std::filesystem::path& path, std::shared_ptr<const Dataset> dataset) {
    if (path.empty()) { throw IoError("load_index: empty path"); }
    require(dataset != nullptr, "load_index: dataset required");
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw IoError("cannot open index file " + path.string()); }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    constexpr std::size_t header = sizeof(kIndexMagic) + 1 + sizeof(std::uint64_t);
    if (bytes.size() < header + sizeof(std::uint32_t)) { throw IoError("index file too short"); }
    if (!std::equal(std::begin(kIndexMagic), std::end(kIndexMagic), bytes.begin())) {
      throw IoError("not an index file (bad magic)");
    }
    if (bytes[sizeof(kIndexMagic)] != kIndexVersion) {
      throw IoError("index version mismatch: file has " + std::to_string(bytes[sizeof(kIndexMagic)]) + ", expected " +
                    std::to_string(kIndexVersion));
    }
    std::uint64_t size = 0;
    std::memcpy(&size, bytes.data() + sizeof(kIndexMagic) + 1, sizeof(size));
    if (size != bytes.size() - header - sizeof(std::uint32_t)) { throw IoError("index file length mismatch"); }
    std::uint32_t stored_crc = 0;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - sizeof(stored_crc), sizeof(stored_crc));
    const std::span<const std::uint8_t> covered(bytes.data(), bytes.size() - sizeof(stored_crc));
    if (crc_of(covered) != stored_crc) { throw IoError("index checksum failure"); }

    ByteReader r(std::span<const std::uint8_t>(bytes.data() + header, size));
    IndexTree tree;
    auto& c = tree.config_;
    c.kind = static_cast<IndexKind>(r.get<std::uint8_t>());
    if (c.kind != IndexKind::isax && c.kind != IndexKind::dstree) { throw IoError("index file: unknown index kind"); }
    c.segment_count = r.get<std::uint64_t>();
    c.leaf_threshold = r.get<std::uint64_t>();
    c.sax_max_cardinality = r.get<std::uint32_t>();
    c.distance.measure = static_cast<DistanceKind::Measure>(r.get<std::uint8_t>());
    c.distance.band_radius = r.get<std::uint64_t>();
    tree.length_ = r.get<std::uint64_t>();
    const auto count = r.get<std::uint64_t>();
    if (tree.length_ != dataset->length() || count != dataset->size()) {
      throw IoError("index was built for a dataset of " + std::to_string(count) + " x " + std::to_string(tree.length_) +
                    ", got " + std::to_string(dataset->size()) + " x " + std::to_string(dataset->length()));
    }
    const auto ends = r.get_vector<std::uint64_t>();
    tree.endpoints_.assign(ends.begin(), ends.end());
    validate_endpoints(tree.endpoints_, tree.length_);
    const std::size_t m = tree.endpoints_.size();
    const auto node_count = r.get<std::uint64_t>();
    if (node_count == 0) { throw IoError("index file has no nodes"); }
    tree.nodes_.resize(node_count);
    for (auto& n : tree.nodes_) {
      n.parent = r.get<std::uint32_t>();
      n.children = r.get_vector<std::uint32_t>();
      n.ids = r.get_vector<std::uint32_t>();
      n.split_segment = r.get<std::int32_t>();
      n.split_threshold = r.get<double>();
      auto& s = n.synopsis;
      s.kind = c.kind;
      if (c.kind == IndexKind::isax) {
        s.sax_symbols = r.get_vector<std::uint16_t>();
        s.sax_bits = r.get_vector<std::uint8_t>();
        if (s.sax_symbols.size() != m || s.sax_bits.size() != m) { throw IoError("index file: bad node synopsis"); }
        s.low.resize(m);
        s.high.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
          if (s.sax_bits[i] > 8 || (s.sax_bits[i] > 0 && s.sax_symbols[i] >= (1U << s.sax_bits[i]))) {
            throw IoError("index file: bad SAX symbol");
          }
          const auto iv = s.sax_bits[i] == 0 ? SaxInterval{-kInfinity, kInfinity}
                                             : sax_interval(s.sax_symbols[i], 1U << s.sax_bits[i]);
          s.low[i] = iv.low;
          s.high[i] = iv.high;
        }
      } else {
        s.low = r.get_vector<double>();
        s.high = r.get_vector<double>();
        s.stdev_min = r.get_vector<double>();
        s.stdev_max = r.get_vector<double>();
        if (s.low.size() != m || s.high.size() != m) { throw IoError("index file: bad node synopsis"); }
      }
      for (auto child : n.children) {
        if (child >= node_count) { throw IoError("index file: child reference out of range"); }
      }
      for (auto id : n.ids) {
        if (id >= count) { throw IoError("index file: series id out of range"); }
      }
      if (n.is_leaf()) {
        ++tree.leaf_count_;
        tree.indexed_count_ += n.ids.size();
      }
    }
    if (!r.done()) { throw IoError("index file has trailing bytes"); }
    tree.dataset_ = std::move(dataset);
    return tree;
  }

} // namespace pros
