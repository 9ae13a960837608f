#include "setpred/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace setpred {

using ordered_json = nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write " + path);
  f << content;
}

void write_jsonl(const Dataset& data, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write " + path);
  for (const Instance& inst : data) {
    ordered_json row;
    row["id"] = inst.id;
    row["w"] = inst.w;
    row["h"] = inst.h;
    row["input"] = inst.input;
    if (!inst.labels.empty() && inst.elements.empty()) {
      row["labels"] = inst.labels;
    } else {
      ordered_json elems = ordered_json::array();
      for (const Element& e : inst.elements) {
        ordered_json el;
        el["box"] = {e.box.x1, e.box.y1, e.box.x2, e.box.y2};
        el["class"] = e.cls;
        elems.push_back(std::move(el));
      }
      row["elements"] = std::move(elems);
    }
    f << row.dump() << "\n";
  }
}

Dataset read_jsonl(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json row;
    try {
      row = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    auto fail = [&](const std::string& msg) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (!row.is_object()) fail("expected a JSON object");
    for (const char* key : {"id", "w", "h", "input"})
      if (!row.contains(key)) fail(std::string("missing key \"") + key + "\"");
    Instance inst;
    inst.id = row["id"].get<std::uint64_t>();
    inst.w = row["w"].get<std::size_t>();
    inst.h = row["h"].get<std::size_t>();
    if (!row["input"].is_array()) fail("\"input\" must be an array");
    inst.input = row["input"].get<std::vector<double>>();
    const std::size_t base = inst.w * inst.h;
    if (inst.input.size() != base &&
        inst.input.size() != base + kCaptchaQuerySide * kCaptchaQuerySide)
      fail("\"input\" length does not match canvas dimensions");
    const bool has_labels = row.contains("labels");
    const bool has_elements = row.contains("elements");
    if (has_labels == has_elements)
      fail("expected exactly one of \"labels\" or \"elements\"");
    if (has_labels) {
      inst.labels = row["labels"].get<std::vector<std::size_t>>();
    } else {
      if (!row["elements"].is_array()) fail("\"elements\" must be an array");
      for (const auto& el : row["elements"]) {
        if (!el.contains("box") || !el.contains("class")) fail("element needs box and class");
        const auto box = el["box"].get<std::vector<double>>();
        if (box.size() != 4) fail("box must have 4 coordinates");
        Element e;
        e.box = {box[0], box[1], box[2], box[3]};
        e.cls = el["class"].get<std::size_t>();
        if (!e.box.valid()) fail("invalid box corners");
        if (e.box.area() <= 0.0) fail("zero-area ground-truth box");
        inst.elements.push_back(e);
      }
    }
    data.push_back(std::move(inst));
  }
  return data;
}

namespace {

const char* card_kind_name(CardKind k) {
  switch (k) {
    case CardKind::categorical: return "categorical";
    case CardKind::poisson: return "poisson";
    case CardKind::negative_binomial: return "negbin";
  }
  return "?";
}

CardKind card_kind_from(const std::string& s) {
  if (s == "categorical") return CardKind::categorical;
  if (s == "poisson") return CardKind::poisson;
  if (s == "negbin") return CardKind::negative_binomial;
  throw FormatError("unknown cardinality kind: " + s);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ordered_json j;
  j["version"] = 1;
  j["task"] = task_to_string(ckpt.layout.task);
  j["scenario"] = static_cast<int>(ckpt.layout.scenario);
  j["card"] = card_kind_name(ckpt.layout.card_kind);
  j["max_card"] = ckpt.layout.M;
  j["state_dim"] = ckpt.layout.state_dim;
  j["layer_widths"] = ckpt.net.widths();
  j["weights"] = ckpt.net.weights();
  j["biases"] = ckpt.net.biases();
  j["config"] = ckpt.config;
  j["config_hash"] = ckpt.config_hash;
  write_text_file(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_text_file(path));
  } catch (const std::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("version"))
    throw FormatError(path + ": not a checkpoint file");
  if (j["version"].get<int>() != 1)
    throw FormatError(path + ": unknown checkpoint version " + j["version"].dump());
  Checkpoint c;
  try {
    c.layout = HeadLayout::make(task_from_string(j["task"].get<std::string>()),
                                static_cast<Scenario>(j["scenario"].get<int>()),
                                card_kind_from(j["card"].get<std::string>()),
                                j["max_card"].get<std::size_t>(),
                                j["state_dim"].get<std::size_t>());
    const auto widths = j["layer_widths"].get<std::vector<std::size_t>>();
    c.net = Mlp(widths, 0);
    c.net.weights() = j["weights"].get<std::vector<std::vector<double>>>();
    c.net.biases() = j["biases"].get<std::vector<std::vector<double>>>();
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      if (c.net.weights()[l].size() != widths[l + 1] * widths[l] ||
          c.net.biases()[l].size() != widths[l + 1])
        throw FormatError(path + ": weight shapes do not match layer_widths");
    }
    if (j.contains("config"))
      c.config = j["config"].get<std::map<std::string, std::string>>();
    if (j.contains("config_hash")) c.config_hash = j["config_hash"].get<std::string>();
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return c;
}

void write_report_csv(const EvalReport& report, const std::string& config_hash,
                      const std::string& path) {
  std::ostringstream ss;
  ss << "name,value\n";
  ss << "config_hash," << config_hash << "\n";
  for (const auto& [name, value] : report.rows()) ss << name << "," << fmt_double(value) << "\n";
  write_text_file(path, ss.str());
}

void write_report_json(const EvalReport& report, const std::string& config_hash,
                       const std::string& path) {
  ordered_json j;
  j["config_hash"] = config_hash;
  for (const auto& [name, value] : report.rows()) j[name] = value;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace setpred
