#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "subens/error.hpp"
#include "subens/network.hpp"

namespace subens {

namespace {

using KeyValues = std::map<std::string, std::string, std::less<>>;

std::string dims_to_text(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out;
}

std::size_t parse_size(std::string_view text, std::size_t line_no, std::string_view key) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw FormatError("line " + std::to_string(line_no) + ": " + std::string(key) + " expects an integer, got '" +
                      std::string(text) + "'");
  }
  return value;
}

class LineReader {
 public:
  LineReader(std::string kind, KeyValues kv, std::size_t line_no)
      : kind_(std::move(kind)), kv_(std::move(kv)), line_(line_no) {}

  std::size_t size(std::string_view key) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw FormatError(where() + "missing key '" + std::string(key) + "'");
    const std::size_t v = parse_size(it->second, line_, key);
    kv_.erase(it);
    return v;
  }

  std::size_t size_or(std::string_view key, std::size_t fallback) { return kv_.contains(key) ? size(key) : fallback; }

  std::string text_or(std::string_view key, std::string fallback) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::string v = it->second;
    kv_.erase(it);
    return v;
  }

  std::string text(std::string_view key) {
    if (!kv_.contains(key)) throw FormatError(where() + "missing key '" + std::string(key) + "'");
    return text_or(key, {});
  }

  void finish() const {
    if (!kv_.empty()) throw FormatError(where() + "unknown key '" + kv_.begin()->first + "'");
  }

  std::string where() const { return "line " + std::to_string(line_) + " (" + kind_ + "): "; }

 private:
  std::string kind_;
  KeyValues kv_;
  std::size_t line_;
};

Shape parse_dims(std::string_view text, std::size_t line_no) {
  Shape shape;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t x = text.find('x', start);
    const std::size_t stop = x == std::string_view::npos ? text.size() : x;
    shape.push_back(parse_size(text.substr(start, stop - start), line_no, "shape"));
    if (x == std::string_view::npos) break;
    start = x + 1;
  }
  return shape;
}

}  // namespace

std::string to_text(const NetworkSpec& spec) {
  std::ostringstream out;
  out << "input shape=" << dims_to_text(spec.input_shape) << '\n';
  for (const auto& layer : spec.layers) {
    out << layer_kind(layer);
    if (const auto* c = std::get_if<Conv2d>(&layer)) {
      out << " in_channels=" << c->in_channels << " out_channels=" << c->out_channels << " kernel_h=" << c->kernel_h
          << " kernel_w=" << c->kernel_w << " stride=" << c->stride
          << " padding=" << (c->padding == Padding::Same ? "same" : "valid");
    } else if (const auto* d = std::get_if<Dense>(&layer)) {
      out << " in_features=" << d->in_features << " out_features=" << d->out_features;
    }
    out << '\n';
  }
  return out.str();
}

NetworkSpec parse_network_text(std::string_view text) {
  NetworkSpec spec;
  bool have_input = false;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream words(raw);
    std::string kind;
    if (!(words >> kind)) continue;
    KeyValues kv;
    for (std::string tok; words >> tok;) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw FormatError("line " + std::to_string(line_no) + ": expected key=value, got '" + tok + "'");
      }
      if (!kv.emplace(tok.substr(0, eq), tok.substr(eq + 1)).second) {
        throw FormatError("line " + std::to_string(line_no) + ": duplicate key '" + tok.substr(0, eq) + "'");
      }
    }
    LineReader r(kind, std::move(kv), line_no);
    if (kind == "input") {
      if (have_input) throw FormatError(r.where() + "duplicate input line");
      spec.input_shape = parse_dims(r.text("shape"), line_no);
      have_input = true;
    } else if (kind == "conv2d") {
      Conv2d c;
      c.in_channels = r.size("in_channels");
      c.out_channels = r.size("out_channels");
      c.kernel_h = r.size("kernel_h");
      c.kernel_w = r.size("kernel_w");
      c.stride = r.size_or("stride", 1);
      const std::string pad = r.text_or("padding", "same");
      if (pad == "same") {
        c.padding = Padding::Same;
      } else if (pad == "valid") {
        c.padding = Padding::Valid;
      } else {
        throw FormatError(r.where() + "padding must be same or valid");
      }
      spec.layers.emplace_back(c);
    } else if (kind == "dense") {
      Dense d;
      d.in_features = r.size("in_features");
      d.out_features = r.size("out_features");
      spec.layers.emplace_back(d);
    } else if (kind == "relu") {
      spec.layers.emplace_back(Relu{});
    } else if (kind == "maxpool2x2") {
      spec.layers.emplace_back(MaxPool2x2{});
    } else if (kind == "flatten") {
      spec.layers.emplace_back(Flatten{});
    } else if (kind == "softmax") {
      spec.layers.emplace_back(Softmax{});
    } else {
      throw FormatError("line " + std::to_string(line_no) + ": unknown layer kind '" + kind + "'");
    }
    r.finish();
  }
  if (!have_input) throw FormatError("network text has no input line");
  Shape shape = spec.input_shape;
  for (const auto& layer : spec.layers) shape = layer_output_shape(layer, shape);
  if (shape.size() != 1) throw ConfigError("network output must be a flat class vector");
  spec.num_classes = shape[0];
  spec.validate();
  return spec;
}

NetworkSpec read_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open network file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_network_text(buf.str());
}

}  // namespace subens
