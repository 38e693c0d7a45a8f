#pragma once

#include "adr/adaptivity.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace adr {

/// Legacy VTK ASCII unstructured grid (triangles, cell type 5).
void write_vtk(const Mesh& mesh, std::ostream& out,
               const std::vector<std::pair<std::string, Eigen::VectorXd>>& cell_data = {},
               const std::vector<std::pair<std::string, Eigen::VectorXd>>& point_data = {});

/// Cell means of a DG function (one value per leaf).
Eigen::VectorXd cell_values(const DGFunction& u);
/// Vertex-averaged values over incident leaves (one value per mesh vertex).
Eigen::VectorXd vertex_averages(const DGFunction& u);

/// Formats a double with 17 significant digits, '.' separator.
std::string csv_number(double v);
/// RFC-4180 quoting for string fields.
std::string csv_quote(const std::string& s);

/// Incremental trace CSV: header + one flushed row per step, '#'-prefixed
/// summary lines appended at the end of a run.
class TraceWriter {
public:
    TraceWriter(std::ostream& out, int n_components);
    void write_row(const TraceRow& row);
    void write_summary(const AdaptiveTrace& trace);
    static std::string header(int n_components);

private:
    std::ostream& out_;
    int ncomp_;
};

struct ParsedCsv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows; // comment lines skipped
};
ParsedCsv parse_csv(std::istream& in);

} // namespace adr
