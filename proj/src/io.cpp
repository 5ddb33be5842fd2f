#include "ddiqc/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ddiqc/errors.hpp"

namespace ddiqc::io {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_double_cell(const std::string& cell, const std::string& source,
                         std::size_t line_no, const std::string& column) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last)
        throw_io(source + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                 cell + "' in column " + column);
    if (!std::isfinite(value))
        throw_io(source + ":" + std::to_string(line_no) + ": non-finite value '" +
                 cell + "' in column " + column);
    return value;
}

long parse_index_cell(const std::string& cell, const std::string& source,
                      std::size_t line_no) {
    long value = 0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last)
        throw_io(source + ":" + std::to_string(line_no) +
                 ": sample index 'k' must be an integer, got '" + cell + "'");
    return value;
}

// Checks a run of header tokens named <prefix>1, <prefix>2, ... and returns
// how many were consumed.
std::size_t count_channel_tokens(const std::vector<std::string>& tokens,
                                 std::size_t start, char prefix) {
    std::size_t count = 0;
    while (start + count < tokens.size()) {
        const std::string& tok = tokens[start + count];
        if (tok.size() < 2 || tok[0] != prefix) break;
        const std::string want = std::string(1, prefix) + std::to_string(count + 1);
        if (tok != want) break;
        ++count;
    }
    return count;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines = split(text, '\n');
    // One trailing newline produces one empty final piece; drop it.
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    for (std::string& line : lines)
        if (!line.empty() && line.back() == '\r') line.pop_back();
    return lines;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

void dump_value(std::string& out, const Json& v) {
    switch (v.type()) {
        case nlohmann::detail::value_t::object: {
            out += '{';
            bool first = true;
            for (const auto& item : v.items()) {
                if (!first) out += ',';
                first = false;
                out += Json(item.key()).dump();
                out += ':';
                dump_value(out, item.value());
            }
            out += '}';
            break;
        }
        case nlohmann::detail::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& el : v) {
                if (!first) out += ',';
                first = false;
                dump_value(out, el);
            }
            out += ']';
            break;
        }
        case nlohmann::detail::value_t::number_float: {
            // Keep float syntax so parsers do not coerce values like -0 or
            // 17 to integers (which would drop the sign of negative zero).
            std::string s = fmt17(v.get<double>());
            if (s.find_first_of(".eE") == std::string::npos) s += ".0";
            out += s;
            break;
        }
        default:
            // strings (escaped), integers, booleans, nulls
            out += v.dump();
    }
}

void check_finite(const Json& v, const std::string& path) {
    if (v.is_object()) {
        for (const auto& item : v.items())
            check_finite(item.value(), path + "/" + item.key());
    } else if (v.is_array()) {
        std::size_t i = 0;
        for (const auto& el : v) check_finite(el, path + "/" + std::to_string(i++));
    } else if (v.is_number_float() && !std::isfinite(v.get<double>())) {
        throw_argument("report invariant violated: non-finite number at '" +
                       path + "'");
    }
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open file for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw_io("read failure on file: " + path);
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot open file for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw_io("write failure on file: " + path);
}

lti::Trajectory parse_trajectory_csv(const std::string& text,
                                     const std::string& source) {
    const std::vector<std::string> lines = split_lines(text);
    if (lines.empty()) throw_io(source + ":1: empty file, expected a CSV header");

    const std::vector<std::string> head = split(lines[0], ',');
    if (head.empty() || head[0] != "k")
        throw_io(source + ":1: malformed header, first column must be 'k'");
    const std::size_t m = count_channel_tokens(head, 1, 'u');
    const std::size_t p = count_channel_tokens(head, 1 + m, 'y');
    if (m == 0 || p == 0 || 1 + m + p != head.size())
        throw_io(source +
                 ":1: malformed header, expected 'k,u1,...,um,y1,...,yp' with "
                 "m >= 1 and p >= 1, got '" +
                 lines[0] + "'");

    const std::size_t n_rows = lines.size() - 1;
    lti::Trajectory traj;
    traj.u.resize(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(m));
    traj.y.resize(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(p));

    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t line_no = r + 2;
        const std::vector<std::string> cells = split(lines[r + 1], ',');
        if (cells.size() != head.size())
            throw_io(source + ":" + std::to_string(line_no) + ": expected " +
                     std::to_string(head.size()) + " cells, got " +
                     std::to_string(cells.size()));
        const long k = parse_index_cell(cells[0], source, line_no);
        if (k != static_cast<long>(r))
            throw_io(source + ":" + std::to_string(line_no) +
                     ": sample indices must be consecutive from 0, expected k = " +
                     std::to_string(r) + ", got k = " + std::to_string(k));
        for (std::size_t j = 0; j < m; ++j)
            traj.u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                parse_double_cell(cells[1 + j], source, line_no, head[1 + j]);
        for (std::size_t j = 0; j < p; ++j)
            traj.y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                parse_double_cell(cells[1 + m + j], source, line_no, head[1 + m + j]);
    }
    return traj;
}

std::string format_trajectory_csv(const lti::Trajectory& traj) {
    traj.validate();
    std::string out = "k";
    for (Eigen::Index j = 0; j < traj.inputs(); ++j)
        out += ",u" + std::to_string(j + 1);
    for (Eigen::Index j = 0; j < traj.outputs(); ++j)
        out += ",y" + std::to_string(j + 1);
    out += '\n';
    for (Eigen::Index k = 0; k < traj.length(); ++k) {
        out += std::to_string(k);
        for (Eigen::Index j = 0; j < traj.inputs(); ++j)
            out += "," + fmt17(traj.u(k, j));
        for (Eigen::Index j = 0; j < traj.outputs(); ++j)
            out += "," + fmt17(traj.y(k, j));
        out += '\n';
    }
    return out;
}

lti::Trajectory load_trajectory_csv(const std::string& path) {
    return parse_trajectory_csv(read_text_file(path), path);
}

void save_trajectory_csv(const std::string& path, const lti::Trajectory& traj) {
    write_text_file(path, format_trajectory_csv(traj));
}

Json matrix_to_json(const Eigen::MatrixXd& M) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& value, const std::string& what) {
    if (!value.is_array())
        throw_io("field '" + what + "' must be an array of rows");
    const Eigen::Index rows = static_cast<Eigen::Index>(value.size());
    Eigen::Index cols = -1;
    Eigen::MatrixXd M;
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& row = value[static_cast<std::size_t>(i)];
        if (!row.is_array())
            throw_io("field '" + what + "' row " + std::to_string(i) +
                     " must be an array of numbers");
        if (cols < 0) {
            cols = static_cast<Eigen::Index>(row.size());
            M.resize(rows, cols);
        } else if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw_io("field '" + what + "' is ragged: row " + std::to_string(i) +
                     " has " + std::to_string(row.size()) + " entries, expected " +
                     std::to_string(cols));
        }
        for (Eigen::Index j = 0; j < cols; ++j) {
            const Json& cell = row[static_cast<std::size_t>(j)];
            if (!cell.is_number())
                throw_io("field '" + what + "' entry (" + std::to_string(i) + "," +
                         std::to_string(j) + ") is not a number");
            const double d = cell.get<double>();
            if (!std::isfinite(d))
                throw_io("field '" + what + "' entry (" + std::to_string(i) + "," +
                         std::to_string(j) + ") is not finite");
            M(i, j) = d;
        }
    }
    if (rows == 0) M.resize(0, 0);
    return M;
}

lti::StateSpaceModel parse_model_json(const std::string& text,
                                      const std::string& source) {
    Json root;
    try {
        root = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw_io(source + ": JSON parse error: " + e.what());
    }
    if (!root.is_object()) throw_io(source + ": model file must hold a JSON object");
    if (!root.contains("schema") || !root["schema"].is_string() ||
        root["schema"].get<std::string>() != "ssmodel/1")
        throw_io(source + ": missing or unsupported schema, expected \"ssmodel/1\"");
    for (const char* field : {"A", "B", "C", "D"})
        if (!root.contains(field))
            throw_io(source + ": missing field '" + std::string(field) + "'");

    lti::StateSpaceModel model;
    model.A = matrix_from_json(root["A"], "A");
    model.B = matrix_from_json(root["B"], "B");
    model.C = matrix_from_json(root["C"], "C");
    model.D = matrix_from_json(root["D"], "D");

    const Eigen::Index n = model.A.rows();
    const Eigen::Index p = model.D.rows();
    const Eigen::Index m = model.D.cols();
    if (model.A.cols() != n) throw_io(source + ": field 'A' must be square");
    if (p < 1 || m < 1)
        throw_io(source + ": field 'D' must be a nonempty p x m matrix");
    // Empty JSON arrays carry no column count; fix up the n = 0 shapes.
    if (n == 0 && model.B.size() == 0) model.B.resize(0, m);
    if (n == 0 && model.C.size() == 0) model.C.resize(p, 0);
    if (model.B.rows() != n || model.B.cols() != m)
        throw_io(source + ": field 'B' must be " + std::to_string(n) + " x " +
                 std::to_string(m));
    if (model.C.rows() != p || model.C.cols() != n)
        throw_io(source + ": field 'C' must be " + std::to_string(p) + " x " +
                 std::to_string(n));
    model.validate();
    return model;
}

std::string format_model_json(const lti::StateSpaceModel& model) {
    model.validate();
    Json root;
    root["schema"] = "ssmodel/1";
    root["A"] = matrix_to_json(model.A);
    root["B"] = matrix_to_json(model.B);
    root["C"] = matrix_to_json(model.C);
    root["D"] = matrix_to_json(model.D);
    return dump_json(root);
}

lti::StateSpaceModel load_model_json(const std::string& path) {
    return parse_model_json(read_text_file(path), path);
}

void save_model_json(const std::string& path, const lti::StateSpaceModel& model) {
    write_text_file(path, format_model_json(model));
}

std::string dump_json(const Json& value) {
    std::string out;
    dump_value(out, value);
    out += '\n';
    return out;
}

std::string report_json(const ReportDocument& doc) {
    check_finite(doc.root, "");
    return dump_json(doc.root);
}

void write_plot_csv(const std::string& path, const std::string& x_label,
                    const std::string& y_label, const std::vector<double>& x,
                    const std::vector<double>& y) {
    if (x.size() != y.size())
        throw_argument("plot series must have equal lengths, got " +
                       std::to_string(x.size()) + " and " + std::to_string(y.size()));
    std::string out = x_label + "," + y_label + "\n";
    for (std::size_t i = 0; i < x.size(); ++i)
        out += fmt17(x[i]) + "," + fmt17(y[i]) + "\n";
    write_text_file(path, out);
}

void write_plot_svg(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw_argument("plot series must have equal lengths, got " +
                       std::to_string(x.size()) + " and " + std::to_string(y.size()));
    if (x.empty()) throw_argument("plot series must be nonempty");

    const double W = 640, H = 440, ml = 70, mr = 20, mt = 40, mb = 50;
    double x_min = x[0], x_max = x[0], y_min = y[0], y_max = y[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
        x_min = std::min(x_min, x[i]);
        x_max = std::max(x_max, x[i]);
        y_min = std::min(y_min, y[i]);
        y_max = std::max(y_max, y[i]);
    }
    if (x_max == x_min) { x_min -= 0.5; x_max += 0.5; }
    if (y_max == y_min) { y_min -= 0.5; y_max += 0.5; }
    const auto px = [&](double v) {
        return ml + (v - x_min) / (x_max - x_min) * (W - ml - mr);
    };
    const auto py = [&](double v) {
        return H - mb - (v - y_min) / (y_max - y_min) * (H - mt - mb);
    };
    const auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return std::string(buf);
    };
    const auto pix = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"440\" "
         "viewBox=\"0 0 640 440\">\n";
    s += "<rect width=\"640\" height=\"440\" fill=\"white\"/>\n";
    s += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">" + xml_escape(title) + "</text>\n";
    // axes
    s += "<line x1=\"" + pix(ml) + "\" y1=\"" + pix(H - mb) + "\" x2=\"" + pix(W - mr) +
         "\" y2=\"" + pix(H - mb) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + pix(ml) + "\" y1=\"" + pix(mt) + "\" x2=\"" + pix(ml) +
         "\" y2=\"" + pix(H - mb) + "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = x_min + (x_max - x_min) * t / 4.0;
        const double fy = y_min + (y_max - y_min) * t / 4.0;
        s += "<line x1=\"" + pix(px(fx)) + "\" y1=\"" + pix(H - mb) + "\" x2=\"" +
             pix(px(fx)) + "\" y2=\"" + pix(H - mb + 5) + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + pix(px(fx)) + "\" y=\"" + pix(H - mb + 20) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
             num(fx) + "</text>\n";
        s += "<line x1=\"" + pix(ml - 5) + "\" y1=\"" + pix(py(fy)) + "\" x2=\"" +
             pix(ml) + "\" y2=\"" + pix(py(fy)) + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + pix(ml - 8) + "\" y=\"" + pix(py(fy) + 4) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
             num(fy) + "</text>\n";
    }
    s += "<text x=\"" + pix((ml + W - mr) / 2) + "\" y=\"" + pix(H - 10) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
         xml_escape(x_label) + "</text>\n";
    s += "<text x=\"18\" y=\"" + pix((mt + H - mb) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 " + pix((mt + H - mb) / 2) + ")\">" +
         xml_escape(y_label) + "</text>\n";
    s += "<polyline fill=\"none\" stroke=\"#1f6fb5\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i) s += ' ';
        s += pix(px(x[i])) + "," + pix(py(y[i]));
    }
    s += "\"/>\n";
    for (std::size_t i = 0; i < x.size(); ++i)
        s += "<circle cx=\"" + pix(px(x[i])) + "\" cy=\"" + pix(py(y[i])) +
             "\" r=\"2.5\" fill=\"#1f6fb5\"/>\n";
    s += "</svg>\n";
    write_text_file(path, s);
}

}  // namespace ddiqc::io
