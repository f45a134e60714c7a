#include "semcomp/compgraph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace semcomp {

const GraphEdge* ComponentGraph::find_edge(std::size_t a, std::size_t b) const {
  if (a > b) std::swap(a, b);
  auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{a, b},
                             [](const GraphEdge& e, const std::pair<std::size_t, std::size_t>& key) {
                               return std::pair{e.a, e.b} < key;
                             });
  return (it != edges.end() && it->a == a && it->b == b) ? &*it : nullptr;
}

const ComponentMeta* ComponentGraph::find_node(std::size_t id) const {
  for (const auto& n : nodes)
    if (n.index == id) return &n;
  return nullptr;
}

namespace {

// Rows set in every bitset, ranked by the summed |N| over `columns`; ties by row.
std::vector<std::size_t> ranked_rows(const std::vector<std::uint64_t>& bits, const RepresentationMatrix& n,
                                     const std::vector<std::size_t>& columns, std::size_t keep) {
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t k = 0; k < bits.size(); ++k) {
    std::uint64_t block = bits[k];
    while (block) {
      const std::size_t row = k * 64 + static_cast<std::size_t>(std::countr_zero(block));
      block &= block - 1;
      double score = 0.0;
      for (auto c : columns) score += std::abs(n.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c)));
      scored.emplace_back(score, row);
    }
  }
  auto before = [](const auto& x, const auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; };
  const std::size_t take = std::min(keep, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), before);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < take; ++i) rows.push_back(scored[i].second);
  return rows;
}

std::vector<std::string> first_n(const std::vector<std::string>& words, std::size_t n) {
  return {words.begin(), words.begin() + static_cast<std::ptrdiff_t>(std::min(n, words.size()))};
}

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + '"';
}

std::string dot_label(const std::vector<std::string>& words) {
  std::string out = "\"";
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += "\\n";
    for (char ch : words[i]) {
      if (ch == '"' || ch == '\\') out += '\\';
      out += ch;
    }
  }
  return out + '"';
}

std::string tex_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '\\': out += "\\textbackslash{}"; break;
      case '_': out += "\\_"; break;
      case '&': out += "\\&"; break;
      case '%': out += "\\%"; break;
      case '$': out += "\\$"; break;
      case '#': out += "\\#"; break;
      case '{': out += "\\{"; break;
      case '}': out += "\\}"; break;
      case '~': out += "\\textasciitilde{}"; break;
      case '^': out += "\\textasciicircum{}"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string tex_lines(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += "\\\\";
    out += tex_escape(words[i]);
  }
  return out;
}

std::string fixed(double v, int digits = 3) {
  if (std::abs(v) < 0.5 * std::pow(10.0, -digits)) v = 0.0;  // no "-0.000"
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

struct Point {
  double x;
  double y;
};

Point ring_point(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Triangle markers sit at 3/4 of the way from the center to the midpoint of the pair.
Point triangle_point(const EgoLayout& layout, std::size_t a, std::size_t b) {
  Point pa{}, pb{};
  for (const auto& r : layout.ring) {
    if (r.id == a) pa = ring_point(r.angle);
    if (r.id == b) pb = ring_point(r.angle);
  }
  return {0.75 * (pa.x + pb.x) / 2.0, 0.75 * (pa.y + pb.y) / 2.0};
}

const ComponentMeta* layout_meta(const EgoLayout& layout, std::size_t id) {
  for (const auto& m : layout.metas)
    if (m.index == id) return &m;
  return nullptr;
}

std::string layout_label(const EgoLayout& layout, std::size_t id) {
  const auto* m = layout_meta(layout, id);
  return m ? m->label() : std::to_string(id);
}

nlohmann::ordered_json node_json(const ComponentMeta& m) {
  nlohmann::ordered_json j;
  j["id"] = m.index;
  j["name"] = m.label();
  j["orientation"] = m.orientation;
  j["active_count"] = m.active_count;
  return j;
}

}  // namespace

ComponentGraph build_graph(const BinaryFeatureMatrix& b, const std::vector<ComponentMeta>& metas,
                           const Vocabulary& vocab, const RepresentationMatrix& n, const GraphOptions& options) {
  if (metas.size() != b.cols()) throw Error("build_graph: metadata count does not match components");
  if (vocab.size() != b.rows() || n.rows() != b.rows() || n.cols() != b.cols()) {
    throw Error("build_graph: binary matrix, vocabulary and normalized matrix are not conformable");
  }
  ComponentGraph g;
  g.nodes = metas;
  g.k = options.k;
  const auto columns = b.column_sets();
  std::vector<std::uint64_t> both;
  for (std::size_t a = 0; a < columns.size(); ++a) {
    for (std::size_t c = a + 1; c < columns.size(); ++c) {
      std::size_t shared = 0;
      for (std::size_t k = 0; k < columns[a].size(); ++k) {
        shared += static_cast<std::size_t>(std::popcount(columns[a][k] & columns[c][k]));
      }
      if (shared <= options.k) continue;
      both.assign(columns[a].size(), 0);
      for (std::size_t k = 0; k < both.size(); ++k) both[k] = columns[a][k] & columns[c][k];
      GraphEdge e{a, c, shared, {}};
      for (auto row : ranked_rows(both, n, {a, c}, options.words_per_edge)) e.top_shared.push_back(vocab.word(row));
      g.edges.push_back(std::move(e));
    }
  }
  return g;
}

EgoLayout ego_subgraph(const ComponentGraph& g, std::size_t center, const EgoOptions& options) {
  const ComponentMeta* center_meta = g.find_node(center);
  if (!center_meta) throw Error("ego_subgraph: unknown center component " + std::to_string(center));
  if (options.ring_capacity < 1) throw Error("ego_subgraph: ring capacity must be at least 1");

  std::vector<const GraphEdge*> spokes;
  for (const auto& e : g.edges)
    if (e.a == center || e.b == center) spokes.push_back(&e);
  auto other = [center](const GraphEdge* e) { return e->a == center ? e->b : e->a; };
  std::sort(spokes.begin(), spokes.end(), [&](const GraphEdge* x, const GraphEdge* y) {
    return x->shared_count != y->shared_count ? x->shared_count > y->shared_count : other(x) < other(y);
  });

  EgoLayout layout;
  layout.center = center;
  layout.metas.push_back(*center_meta);
  const std::size_t ring_size = std::min(options.ring_capacity, spokes.size());
  for (std::size_t j = 0; j < spokes.size(); ++j) {
    const std::size_t id = other(spokes[j]);
    if (const auto* m = g.find_node(id)) layout.metas.push_back(*m);
    if (j < ring_size) {
      const double angle = std::numbers::pi / 2.0 - 2.0 * std::numbers::pi * static_cast<double>(j) /
                                                        static_cast<double>(ring_size);
      layout.ring.push_back({id, angle, spokes[j]->shared_count});
      layout.edges.push_back({center, id, first_n(spokes[j]->top_shared, options.labels_per_edge)});
    } else {
      layout.overflow.push_back({id, spokes[j]->shared_count, first_n(spokes[j]->top_shared, options.overflow_words)});
    }
  }
  if (ring_size >= 2) {
    // With two ring nodes there is only one adjacent pair.
    const std::size_t pairs = ring_size == 2 ? 1 : ring_size;
    for (std::size_t j = 0; j < pairs; ++j) {
      const std::size_t a = layout.ring[j].id;
      const std::size_t b = layout.ring[(j + 1) % ring_size].id;
      if (const auto* e = g.find_edge(a, b)) layout.edges.push_back({a, b, first_n(e->top_shared, options.labels_per_edge)});
    }
  }
  return layout;
}

void annotate_triangles(EgoLayout& layout, const BinaryFeatureMatrix& b, const Vocabulary& vocab,
                        const RepresentationMatrix& n, std::size_t max_words) {
  layout.triangles.clear();
  const std::size_t ring_size = layout.ring.size();
  if (ring_size < 2 || max_words == 0) return;
  if (vocab.size() != b.rows() || n.rows() != b.rows() || n.cols() != b.cols()) {
    throw Error("annotate_triangles: inputs are not conformable");
  }
  const auto columns = b.column_sets();
  const std::size_t pairs = ring_size == 2 ? 1 : ring_size;
  for (std::size_t j = 0; j < pairs; ++j) {
    const std::size_t a = layout.ring[j].id;
    const std::size_t c = layout.ring[(j + 1) % ring_size].id;
    std::vector<std::uint64_t> all(columns[layout.center]);
    for (std::size_t k = 0; k < all.size(); ++k) all[k] &= columns[a][k] & columns[c][k];
    const auto rows = ranked_rows(all, n, {layout.center, a, c}, max_words);
    if (rows.empty()) continue;
    TriangleNode t{a, c, {}};
    for (auto r : rows) t.words.push_back(vocab.word(r));
    layout.triangles.push_back(std::move(t));
  }
}

std::string export_dot(const ComponentGraph& g, std::size_t labels_per_edge) {
  std::ostringstream os;
  os << "graph components {\n  node [shape=circle];\n";
  for (const auto& node : g.nodes) os << "  " << node.index << " [label=" << dot_quote(node.label()) << "];\n";
  for (const auto& e : g.edges) {
    os << "  " << e.a << " -- " << e.b << " [label=" << dot_label(first_n(e.top_shared, labels_per_edge))
       << ", weight=" << e.shared_count << "];\n";
  }
  os << "}\n";
  return os.str();
}

std::string export_dot(const EgoLayout& layout) {
  std::ostringstream os;
  os << "graph ego_" << layout.center << " {\n  node [shape=circle];\n";
  os << "  " << layout.center << " [label=" << dot_quote(layout_label(layout, layout.center)) << ", pos=\"0,0!\"];\n";
  for (const auto& r : layout.ring) {
    const Point p = ring_point(r.angle);
    os << "  " << r.id << " [label=" << dot_quote(layout_label(layout, r.id)) << ", pos=\"" << fixed(p.x) << ","
       << fixed(p.y) << "!\"];\n";
  }
  for (const auto& t : layout.triangles) {
    const Point p = triangle_point(layout, t.a, t.b);
    os << "  x" << t.a << "x" << t.b << " [shape=triangle, label=" << dot_label(t.words) << ", pos=\"" << fixed(p.x)
       << "," << fixed(p.y) << "!\"];\n";
  }
  for (const auto& e : layout.edges) os << "  " << e.a << " -- " << e.b << " [label=" << dot_label(e.words) << "];\n";
  os << "}\n";
  return os.str();
}

std::string export_json(const ComponentGraph& g) {
  nlohmann::ordered_json j;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& node : g.nodes) j["nodes"].push_back(node_json(node));
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : g.edges) {
    nlohmann::ordered_json edge;
    edge["a"] = e.a;
    edge["b"] = e.b;
    edge["shared_count"] = e.shared_count;
    edge["top_words"] = e.top_shared;
    j["edges"].push_back(std::move(edge));
  }
  j["k"] = g.k;
  return j.dump(2) + "\n";
}

std::string export_json(const EgoLayout& layout) {
  nlohmann::ordered_json j;
  j["center"] = node_json(*layout_meta(layout, layout.center));
  j["ring"] = nlohmann::ordered_json::array();
  for (const auto& r : layout.ring) {
    const Point p = ring_point(r.angle);
    nlohmann::ordered_json node;
    node["id"] = r.id;
    node["name"] = layout_label(layout, r.id);
    node["angle"] = r.angle;
    node["x"] = p.x;
    node["y"] = p.y;
    node["shared_count"] = r.shared_count;
    j["ring"].push_back(std::move(node));
  }
  j["overflow"] = nlohmann::ordered_json::array();
  for (const auto& o : layout.overflow) {
    nlohmann::ordered_json node;
    node["id"] = o.id;
    node["name"] = layout_label(layout, o.id);
    node["shared_count"] = o.shared_count;
    node["top_words"] = o.words;
    j["overflow"].push_back(std::move(node));
  }
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : layout.edges) {
    j["edges"].push_back(nlohmann::ordered_json{{"a", e.a}, {"b", e.b}, {"words", e.words}});
  }
  j["triangles"] = nlohmann::ordered_json::array();
  for (const auto& t : layout.triangles) {
    j["triangles"].push_back(nlohmann::ordered_json{{"a", t.a}, {"b", t.b}, {"words", t.words}});
  }
  return j.dump(2) + "\n";
}

std::string export_tikz(const EgoLayout& layout) {
  std::ostringstream os;
  os << "\\documentclass[tikz,border=10pt]{standalone}\n"
        "\\usetikzlibrary{backgrounds}\n"
        "\\usetikzlibrary{shapes}\n"
        "\\begin{document}\n"
        "\\begin{tikzpicture}[scale=7,\n"
        "compnode/.style={circle,fill,draw,blue!40!cyan!15,minimum size=20pt,inner sep=0pt},\n"
        "innode/.style={regular polygon,regular polygon sides=3,green!40!cyan!10,fill,draw,minimum size=25pt,inner sep=0pt},\n"
        "tedge/.style={fill=white,rounded corners,opacity=0.9,text opacity=1}]\n";
  os << "  \\draw[font=\\small\\bfseries]\n";
  os << "    (0.000, 0.000) node[compnode,label={[align=center]center:" << tex_escape(layout_label(layout, layout.center))
     << "}] (" << layout.center << "){}";
  for (const auto& r : layout.ring) {
    const Point p = ring_point(r.angle);
    os << "\n    (" << fixed(p.x) << ", " << fixed(p.y) << ") node[compnode,label={[align=center]center:"
       << tex_escape(layout_label(layout, r.id)) << "}] (" << r.id << "){}";
  }
  for (const auto& t : layout.triangles) {
    const Point p = triangle_point(layout, t.a, t.b);
    os << "\n    (" << fixed(p.x) << ", " << fixed(p.y)
       << ") node[innode,label={[align=center,font=\\scriptsize]center:" << tex_lines(t.words) << "}] (x" << t.a << "x"
       << t.b << "){}";
  }
  os << ";\n";
  os << "  \\begin{scope}[-,align=center,font=\\scriptsize, on background layer]\n";
  for (const auto& e : layout.edges) {
    os << "    \\draw (" << e.a << ") to node[tedge,pos=0.5] {" << tex_lines(e.words) << "} (" << e.b << ");\n";
  }
  os << "  \\end{scope}\n";
  if (!layout.overflow.empty()) {
    os << "  \\node[anchor=north,align=left,font=\\small] at (0,-1.25) {\\begin{tabular}{ll}\n"
          "    Component & Words \\\\ \\hline\n";
    for (const auto& o : layout.overflow) {
      os << "    " << tex_escape(layout_label(layout, o.id)) << " & ";
      for (std::size_t i = 0; i < o.words.size(); ++i) os << (i ? ", " : "") << tex_escape(o.words[i]);
      os << " \\\\\n";
    }
    os << "  \\end{tabular}};\n";
  }
  os << "\\end{tikzpicture}\n\\end{document}\n";
  return os.str();
}

ComponentGraph graph_from_json(const nlohmann::json& j) {
  ComponentGraph g;
  g.k = j.value("k", std::size_t{0});
  for (const auto& node : j.at("nodes")) {
    ComponentMeta m;
    m.index = node.at("id").get<std::size_t>();
    m.orientation = node.at("orientation").get<int>();
    m.active_count = node.at("active_count").get<std::size_t>();
    const auto name = node.at("name").get<std::string>();
    if (name != std::to_string(m.index)) m.chosen_name = name;
    g.nodes.push_back(std::move(m));
  }
  for (const auto& edge : j.at("edges")) {
    GraphEdge e;
    e.a = edge.at("a").get<std::size_t>();
    e.b = edge.at("b").get<std::size_t>();
    if (e.a >= e.b) throw Error("graph edge must satisfy a < b");
    e.shared_count = edge.at("shared_count").get<std::size_t>();
    e.top_shared = edge.at("top_words").get<std::vector<std::string>>();
    g.edges.push_back(std::move(e));
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const auto& x, const auto& y) { return std::pair{x.a, x.b} < std::pair{y.a, y.b}; });
  return g;
}

}  // namespace semcomp
