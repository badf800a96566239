#include "eyetrans/attnmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "eyetrans/io.hpp"

namespace eyetrans {

AttentionDump attention_dump(TaskModel& model, const DatasetRow& row, bool baseline) {
  const ModelConfig& c = model.config();
  if (row.tokens.size() > static_cast<std::size_t>(kMaxTokens)) {
    throw SampleTooLong(row.id + ": " + std::to_string(row.tokens.size()) + " tokens exceeds the 200-token cap");
  }
  for (int h : row.heights) {
    if (h > c.max_height) throw SampleTooLong(row.id + ": height exceeds the model maximum");
  }
  validate_row(row);
  AttentionDump dump;
  ForwardOptions<float> opts;
  opts.use_switches = !baseline;
  opts.trace = &dump.heads;
  nn::Tape<float> t;
  if (model.task() == TaskKind::functional) {
    dump.labels.push_back("CLS");
    model.functional().encode(t, row, opts);
  } else {
    model.seq2seq().encode(t, row, opts);
  }
  for (int cat : row.tokens) dump.labels.emplace_back(category_name(*category_from_id(cat)));
  return dump;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::pair<float, float> range(const nn::Tensor<float>& m) {
  auto [lo, hi] = std::minmax_element(m.data.begin(), m.data.end());
  return {*lo, *hi};
}

int level(float v, float lo, float hi) {
  if (!(hi > lo)) return 0;
  return static_cast<int>(std::lround(255.0 * (static_cast<double>(v) - lo) / (static_cast<double>(hi) - lo)));
}

void check_labels(const nn::Tensor<float>& m, const std::vector<std::string>& labels) {
  if (m.rows() != labels.size() || m.cols() != labels.size()) throw ShapeMismatch("attention map: label count");
}

nn::Tensor<float> difference(const nn::Tensor<float>& a, const nn::Tensor<float>& b) {
  if (a.shape != b.shape) throw ShapeMismatch("attention maps differ in shape");
  nn::Tensor<float> d = a;
  for (std::size_t i = 0; i < d.size(); ++i) d.data[i] = a.data[i] - b.data[i];
  return d;
}

void write_all(std::vector<std::filesystem::path>& out, const std::filesystem::path& base,
               const nn::Tensor<float>& m, const std::vector<std::string>& labels, const std::string& title) {
  auto write = [&](const std::string& ext, const std::string& body) {
    auto p = base;
    p += ext;
    write_file_atomic(p, body);
    out.push_back(p);
  };
  write(".csv", matrix_csv(m, labels));
  write(".pgm", matrix_pgm(m));
  write(".svg", matrix_svg(m, labels, title));
}

}  // namespace

std::string matrix_csv(const nn::Tensor<float>& m, const std::vector<std::string>& labels) {
  check_labels(m, labels);
  std::string out = "token";
  for (const auto& l : labels) out += "," + l;
  out += '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out += labels[i];
    for (std::size_t j = 0; j < m.cols(); ++j) out += "," + fmt(m.at(i, j));
    out += '\n';
  }
  return out;
}

std::string matrix_pgm(const nn::Tensor<float>& m) {
  const auto [lo, hi] = range(m);
  std::string out = "P2\n# min " + fmt(lo) + " max " + fmt(hi) + "\n" + std::to_string(m.cols()) + " " +
                    std::to_string(m.rows()) + "\n255\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ' ';
      out += std::to_string(level(m.at(i, j), lo, hi));
    }
    out += '\n';
  }
  return out;
}

std::string matrix_svg(const nn::Tensor<float>& m, const std::vector<std::string>& labels, const std::string& title) {
  check_labels(m, labels);
  const int cell = 16, margin = 150, top = 30;
  const int n = static_cast<int>(m.rows());
  const int size = margin + n * cell + 10;
  const auto [lo, hi] = range(m);
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size + top
    << "\" font-family=\"monospace\" font-size=\"9\">\n";
  s << "<text x=\"4\" y=\"14\" font-size=\"12\">" << xml_escape(title) << "</text>\n";
  for (int i = 0; i < n; ++i) {
    const int y = top + margin + i * cell;
    s << "<text x=\"" << margin - 4 << "\" y=\"" << y + cell - 4 << "\" text-anchor=\"end\">"
      << xml_escape(labels[static_cast<std::size_t>(i)]) << "</text>\n";
    const int x = margin + i * cell + cell - 4;
    s << "<text x=\"" << x << "\" y=\"" << top + margin - 4 << "\" transform=\"rotate(-90 " << x << " "
      << top + margin - 4 << ")\">" << xml_escape(labels[static_cast<std::size_t>(i)]) << "</text>\n";
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int g = 255 - level(m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)), lo, hi);
      s << "<rect x=\"" << margin + j * cell << "\" y=\"" << top + margin + i * cell << "\" width=\"" << cell
        << "\" height=\"" << cell << "\" fill=\"rgb(" << g << "," << g << "," << g << ")\"/>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<double> row_entropy(const nn::Tensor<float>& w) {
  std::vector<double> out;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double h = 0;
    for (std::size_t j = 0; j < w.cols(); ++j) {
      const double p = w.at(i, j);
      if (p > 0) h -= p * std::log(p);
    }
    out.push_back(h);
  }
  return out;
}

std::vector<std::filesystem::path> export_attention(const std::filesystem::path& dir, const AttentionDump& dump,
                                                    const std::string& prefix) {
  std::vector<std::filesystem::path> out;
  for (std::size_t h = 0; h < dump.heads.size(); ++h) {
    const std::string stem = prefix + "head" + std::to_string(h);
    write_all(out, dir / (stem + "_pre"), dump.heads[h].scores, dump.labels, stem + " QK^T/sqrt(d_k)");
    write_all(out, dir / (stem + "_post"), dump.heads[h].weights, dump.labels, stem + " softmax");
  }
  return out;
}

std::vector<std::filesystem::path> export_paired(const std::filesystem::path& dir, const AttentionDump& eyetrans,
                                                 const AttentionDump& baseline) {
  if (eyetrans.labels != baseline.labels || eyetrans.heads.size() != baseline.heads.size()) {
    throw ShapeMismatch("paired attention maps come from different samples or models");
  }
  std::vector<std::filesystem::path> out;
  std::string entropy = "head,row,token,entropy_eyetrans,entropy_baseline\n";
  for (std::size_t h = 0; h < eyetrans.heads.size(); ++h) {
    const std::string stem = "diff_head" + std::to_string(h);
    write_all(out, dir / stem, difference(eyetrans.heads[h].weights, baseline.heads[h].weights), eyetrans.labels,
              stem + " eyetrans - baseline");
    const auto he = row_entropy(eyetrans.heads[h].weights);
    const auto hb = row_entropy(baseline.heads[h].weights);
    for (std::size_t i = 0; i < he.size(); ++i) {
      entropy += std::to_string(h) + "," + std::to_string(i) + "," + eyetrans.labels[i] + "," + fmt(he[i]) + "," +
                 fmt(hb[i]) + "\n";
    }
  }
  write_file_atomic(dir / "entropy.csv", entropy);
  out.push_back(dir / "entropy.csv");
  return out;
}

}  // namespace eyetrans
