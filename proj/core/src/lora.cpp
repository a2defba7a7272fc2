#include "stylid/lora.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "stylid/error.hpp"

namespace stylid {

void LoRAAdapter::validate() const {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("LoRA factors must be matrices");
  if (a.cols() != b.rows()) {
    throw ShapeError("LoRA factors do not chain: A " + shape_string(a.shape()) + ", B " + shape_string(b.shape()));
  }
  if (rank() > std::min(in_dim(), out_dim())) throw ConfigError("LoRA rank exceeds min(d, k)");
  if (!(alpha > 0.0)) throw ConfigError("LoRA alpha must be positive");
}

LoRAAdapter LoRAAdapter::init(std::size_t in_dim, std::size_t out_dim, std::size_t rank, double alpha, RngStream& rng,
                              double init_scale) {
  LoRAAdapter ad{gaussian(rng, {in_dim, rank}) * init_scale, Tensor({rank, out_dim}), alpha};
  ad.validate();
  return ad;
}

Tensor LoRAAdapter::delta() const { return matmul(a, b) * alpha; }

Tensor merge(const Tensor& w, const LoRAAdapter& adapter) {
  adapter.validate();
  if (w.rank() != 2 || w.rows() != adapter.in_dim() || w.cols() != adapter.out_dim()) {
    throw ShapeError("LoRA adapter " + shape_string(adapter.a.shape()) + "·" + shape_string(adapter.b.shape()) +
                     " does not fit weight " + shape_string(w.shape()));
  }
  return w + adapter.delta();
}

AttentionWeights apply_to_attention(const AttentionWeights& w, const AdapterSet& adapters) {
  AttentionWeights out = w;
  if (adapters.q) out.w_q = merge(w.w_q, *adapters.q);
  if (adapters.k) out.w_k = merge(w.w_k, *adapters.k);
  if (adapters.v) out.w_v = merge(w.w_v, *adapters.v);
  return out;
}

ExtendedAttentionWeights apply_to_attention(const ExtendedAttentionWeights& w, const AdapterSet& adapters) {
  ExtendedAttentionWeights out = w;
  out.base = apply_to_attention(w.base, adapters);
  return out;
}

void LoraTrainConfig::validate() const {
  if (rank < 1) throw ConfigError("LoRA rank must be at least 1");
  if (!(alpha > 0.0)) throw ConfigError("LoRA alpha must be positive");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (steps < 0) throw ConfigError("training steps must be non-negative");
  if (!target_q && !target_k && !target_v) throw ConfigError("LoRA training needs at least one target matrix");
}

namespace {

void write_matrix(std::ostream& os, const char* tag, const Tensor& m) {
  os << tag << ',' << m.rows() << ',' << m.cols();
  char buf[32];
  for (double v : m.values()) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  }
  os << '\n';
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Tensor read_matrix(const std::string& line, const char* tag) {
  const auto cells = split_csv(line);
  if (cells.size() < 3 || cells[0] != tag) throw InputError(std::string("adapter file: expected '") + tag + "' row");
  const std::size_t r = std::stoul(cells[1]), c = std::stoul(cells[2]);
  if (cells.size() != 3 + r * c) throw InputError("adapter file: matrix row has the wrong number of values");
  std::vector<double> data;
  data.reserve(r * c);
  for (std::size_t i = 3; i < cells.size(); ++i) data.push_back(std::stod(cells[i]));
  return Tensor({r, c}, std::move(data));
}

}  // namespace

void write_adapters(std::ostream& os, const AdapterSet& adapters) {
  auto block = [&os](char target, const std::optional<LoRAAdapter>& ad) {
    if (!ad) return;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", ad->alpha);
    os << "adapter," << target << ',' << ad->rank() << ',' << buf << '\n';
    write_matrix(os, "a", ad->a);
    write_matrix(os, "b", ad->b);
  };
  block('q', adapters.q);
  block('k', adapters.k);
  block('v', adapters.v);
}

AdapterSet read_adapters(std::istream& is) {
  AdapterSet set;
  std::string line;
  try {
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto head = split_csv(line);
      if (head.size() != 4 || head[0] != "adapter" || head[1].size() != 1) {
        throw InputError("adapter file: malformed header '" + line + "'");
      }
      std::string a_line, b_line;
      if (!std::getline(is, a_line) || !std::getline(is, b_line)) throw InputError("adapter file: truncated block");
      LoRAAdapter ad{read_matrix(a_line, "a"), read_matrix(b_line, "b"), std::stod(head[3])};
      ad.validate();
      if (ad.rank() != std::stoul(head[2])) throw InputError("adapter file: rank does not match factors");
      switch (head[1][0]) {
        case 'q': set.q = std::move(ad); break;
        case 'k': set.k = std::move(ad); break;
        case 'v': set.v = std::move(ad); break;
        default: throw InputError("adapter file: unknown target '" + head[1] + "'");
      }
    }
  } catch (const std::invalid_argument&) {
    throw InputError("adapter file: unparsable number");
  } catch (const std::out_of_range&) {
    throw InputError("adapter file: number out of range");
  }
  return set;
}

}  // namespace stylid
