#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "finelab/cartan.hpp"

namespace finelab {

/// Shortest text that parses back to the same double; inf and nan spelled out.
std::string format_double(double x);
/// JSON number, or the strings "inf", "-inf", "nan" for non-finite values.
nlohmann::json json_number(double x);
double number_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SolveResult& r, const WeightedGraphSpace& space);
nlohmann::json to_json(const CapacityResult& r);
nlohmann::json to_json(const ComparisonReport& r);
nlohmann::json to_json(const MonotonicityReport& r);
nlohmann::json to_json(const GeometryReport& r);
nlohmann::json to_json(const SuperminimizerReport& r);
nlohmann::json to_json(const WienerOptions& o);
nlohmann::json to_json(const ClassificationPolicy& p);
nlohmann::json to_json(const WienerReport& r);
nlohmann::json to_json(const Classification& c);
nlohmann::json to_json(const ShrinkProfile& s);
nlohmann::json to_json(const ThinUnionResult& r);
nlohmann::json to_json(const CartanCertificate& c);
nlohmann::json to_json(const BoundsReport& r);
nlohmann::json to_json(const BoundaryReport& r);
nlohmann::json to_json(const StrongCartanResult& r);
nlohmann::json to_json(const HarnackReport& r);

/// `j,r_j,cap_num,cap_den,t_j,partial_sum`, one row per computed scale.
void write_terms_csv(std::ostream& out, const WienerReport& r);
/// `rho,capacity,kkt_residual,iterations`.
void write_shrink_csv(std::ostream& out, const ShrinkProfile& s);
/// `node_id,value` in node order.
void write_field_csv(std::ostream& out, const WeightedGraphSpace& space, const ScalarField& field);
/// Inverse of write_field_csv; every node of the space must appear once.
ScalarField read_field_csv(std::istream& in, const WeightedGraphSpace& space);

std::string dump_json(const nlohmann::json& j);
void write_file(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace finelab
