#pragma once

#include <string>

#include "tabgen/table.hpp"

namespace tabgen {

TableSchema mathexpr_schema();
TableSchema profilebio_schema();

// Deterministic, seedable generators. Row i draws from a stream derived from
// (seed, i), so parallel generation partitions the index space safely.
Table gen_mathexpr(int n, std::uint64_t seed);
Table gen_profilebio(int n, std::uint64_t seed);

std::string render_latex(double x1, double x2, const std::string& o1, const std::string& o2,
                         const std::string& o3);

int salary_model_with_noise(int age, const std::string& degree, const std::string& occupation,
                            double noise);
int salary_model(int age, const std::string& degree, const std::string& occupation, Rng& rng);

std::string age_descriptor(int age);
std::string salary_descriptor(int salary);
std::string render_biography(int age, int salary, const std::string& sex,
                             const std::string& birth_state, const std::string& college,
                             const std::string& degree, const std::string& occupation);

Table gen_dataset(const std::string& name, int n, std::uint64_t seed);

}  // namespace tabgen
