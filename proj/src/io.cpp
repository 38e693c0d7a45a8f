#include "adr/io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace adr {

void write_vtk(const Mesh& mesh, std::ostream& out,
               const std::vector<std::pair<std::string, Eigen::VectorXd>>& cell_data,
               const std::vector<std::pair<std::string, Eigen::VectorXd>>& point_data) {
    out << "# vtk DataFile Version 3.0\n";
    out << "adr mesh\n";
    out << "ASCII\n";
    out << "DATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.vertices.size() << " double\n";
    out.precision(17);
    for (const auto& v : mesh.vertices)
        out << v.x.x() << " " << v.x.y() << " 0\n";
    const int n = mesh.leaf_count();
    out << "CELLS " << n << " " << 4 * n << "\n";
    for (int t : mesh.leaves)
        out << "3 " << mesh.tris[t].v[0] << " " << mesh.tris[t].v[1] << " "
            << mesh.tris[t].v[2] << "\n";
    out << "CELL_TYPES " << n << "\n";
    for (int i = 0; i < n; ++i) out << "5\n";
    if (!cell_data.empty()) {
        out << "CELL_DATA " << n << "\n";
        for (const auto& [name, values] : cell_data) {
            out << "SCALARS " << name << " double 1\n";
            out << "LOOKUP_TABLE default\n";
            for (int i = 0; i < values.size(); ++i) out << values[i] << "\n";
        }
    }
    if (!point_data.empty()) {
        out << "POINT_DATA " << mesh.vertices.size() << "\n";
        for (const auto& [name, values] : point_data) {
            out << "SCALARS " << name << " double 1\n";
            out << "LOOKUP_TABLE default\n";
            for (int i = 0; i < values.size(); ++i) out << values[i] << "\n";
        }
    }
}

Eigen::VectorXd cell_values(const DGFunction& u) {
    const DGSpace& sp = u.space();
    Eigen::VectorXd out(sp.mesh().leaf_count());
    for (int li = 0; li < out.size(); ++li) {
        // Mean value: only the constant mode integrates to a nonzero value.
        out[li] = u.coeff()[sp.block_start(li)] * std::sqrt(2.0) * sp.geom(li).scale;
    }
    return out;
}

Eigen::VectorXd vertex_averages(const DGFunction& u) {
    const DGSpace& sp = u.space();
    const Mesh& mesh = sp.mesh();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(mesh.vertices.size());
    Eigen::VectorXd count = Eigen::VectorXd::Zero(mesh.vertices.size());
    for (int t : mesh.leaves)
        for (int i = 0; i < 3; ++i) {
            int v = mesh.tris[t].v[i];
            sum[v] += u.eval(t, mesh.vertices[v].x);
            count[v] += 1.0;
        }
    for (int v = 0; v < sum.size(); ++v)
        if (count[v] > 0.0) sum[v] /= count[v];
    return sum;
}

std::string csv_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string TraceWriter::header(int n_components) {
    std::ostringstream os;
    os << "step,t,tau,dofs,union_dofs";
    auto comp_cols = [&](const std::string& base) {
        if (n_components == 1) {
            os << "," << base;
        } else {
            for (int c = 1; c <= n_components; ++c)
                os << "," << base << "_" << c;
        }
    };
    comp_cols("eta_S1");
    comp_cols("eta_S2");
    comp_cols("eta_S3");
    comp_cols("eta_S4");
    comp_cols("eta_T_tilde");
    os << ",newton_iters,refined,coarsened,halvings";
    return os.str();
}

TraceWriter::TraceWriter(std::ostream& out, int n_components)
    : out_(out), ncomp_(n_components) {
    out_ << header(n_components) << "\n";
    out_.flush();
}

void TraceWriter::write_row(const TraceRow& row) {
    std::ostringstream os;
    os << row.step << "," << csv_number(row.t) << "," << csv_number(row.tau)
       << "," << row.dofs << "," << row.union_dofs;
    auto emit = [&](const std::vector<double>& sq) {
        for (int c = 0; c < ncomp_; ++c)
            os << ","
               << csv_number(c < static_cast<int>(sq.size()) ? std::sqrt(sq[c])
                                                             : 0.0);
    };
    emit(row.s1);
    emit(row.s2);
    emit(row.s3);
    emit(row.s4);
    emit(row.t_tilde);
    os << "," << row.newton_iters << "," << row.refined << "," << row.coarsened
       << "," << row.halvings;
    out_ << os.str() << "\n";
    out_.flush();
}

void TraceWriter::write_summary(const AdaptiveTrace& trace) {
    out_ << "# summary total_steps=" << trace.rows.size() - 1
         << " sum_tau=" << csv_number(trace.total_time);
    if (trace.total_time > 0.0)
        out_ << " weighted_dofs=" << csv_number(weighted_dofs(trace));
    for (size_t c = 0; c < trace.run.size(); ++c) {
        out_ << " eta_S_sq_" << c + 1 << "="
             << csv_number(trace.run[c].eta_S_sq()) << " eta_T_sq_" << c + 1
             << "=" << csv_number(trace.run[c].eta_T_sq())
             << " sum_eta_T_tilde_sq_" << c + 1 << "="
             << csv_number(trace.run[c].t_tilde_sum);
    }
    if (trace.has_error)
        out_ << " err_star=" << csv_number(trace.error.norm())
             << " err_final_l2=" << csv_number(trace.error.final_l2);
    out_ << "\n";
    out_.flush();
}

ParsedCsv parse_csv(std::istream& in) {
    ParsedCsv out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::string cur;
        bool quoted = false;
        for (size_t i = 0; i < line.size(); ++i) {
            char ch = line[i];
            if (quoted) {
                if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else if (ch == '"') {
                    quoted = false;
                } else {
                    cur += ch;
                }
            } else if (ch == '"') {
                quoted = true;
            } else if (ch == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        fields.push_back(cur);
        if (first) {
            out.header = fields;
            first = false;
        } else {
            out.rows.push_back(fields);
        }
    }
    return out;
}

} // namespace adr
