#include "tabgen/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace tabgen {

namespace {

constexpr const char* kUnaryOps[] = {"none", "log",  "exp",    "sqrt", "sin",
                                     "cos",  "tan",  "square", "cube"};
constexpr const char* kBinaryOps[] = {"add", "sub", "mul", "div"};

// unary operator priors for x1 and x2, in kUnaryOps order
constexpr double kO1Prior[] = {0.18, 0.16, 0.07, 0.13, 0.10, 0.10, 0.07, 0.12, 0.07};
constexpr double kO2Prior[] = {0.22, 0.10, 0.06, 0.12, 0.14, 0.14, 0.07, 0.09, 0.06};
constexpr double kO3Prior[] = {0.35, 0.20, 0.30, 0.15};

int sample_weighted(const double* weights, int n, Rng& rng) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += weights[i];
    double u = uniform01(rng) * total;
    for (int i = 0; i < n; ++i) {
        u -= weights[i];
        if (u < 0.0) return i;
    }
    return n - 1;
}

// grid-restricted Gaussian: weights proportional to the normal density at grid points
std::vector<double> discrete_gaussian_weights(double lo, double step, int count, double mu,
                                              double sd) {
    std::vector<double> w(count);
    for (int i = 0; i < count; ++i) {
        const double g = lo + step * i;
        const double z = (g - mu) / sd;
        w[i] = std::exp(-0.5 * z * z);
    }
    return w;
}

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

TableSchema mathexpr_schema() {
    TableSchema s;
    s.dataset = "mathexpr";
    s.columns = {
        {"x1", ColumnKind::Numerical, {}, 2},
        {"x2", ColumnKind::Numerical, {}, 2},
        {"operation_x1", ColumnKind::Categorical,
         {std::begin(kUnaryOps), std::end(kUnaryOps)}, -1},
        {"operation_x2", ColumnKind::Categorical,
         {std::begin(kUnaryOps), std::end(kUnaryOps)}, -1},
        {"operation_between", ColumnKind::Categorical,
         {std::begin(kBinaryOps), std::end(kBinaryOps)}, -1},
        {"latex_expression", ColumnKind::Text, {}, -1},
    };
    return s;
}

std::string render_latex(double x1, double x2, const std::string& o1, const std::string& o2,
                         const std::string& o3) {
    auto unary = [](const std::string& op, const std::string& num) -> std::string {
        if (op == "none") return num;
        if (op == "log") return "\\log(" + num + ")";
        if (op == "exp") return "\\exp(" + num + ")";
        if (op == "sqrt") return "\\sqrt{" + num + "}";
        if (op == "sin") return "\\sin(" + num + ")";
        if (op == "cos") return "\\cos(" + num + ")";
        if (op == "tan") return "\\tan(" + num + ")";
        if (op == "square") return "(" + num + ")^2";
        if (op == "cube") return "(" + num + ")^3";
        throw std::runtime_error("render_latex: unknown unary operator: " + op);
    };
    const std::string a = unary(o1, fmt2(x1));
    const std::string b = unary(o2, fmt2(x2));
    if (o3 == "add") return a + " + " + b;
    if (o3 == "sub") return a + " - " + b;
    if (o3 == "mul") return a + " \\times " + b;
    if (o3 == "div") return "\\frac{" + a + "}{" + b + "}";
    throw std::runtime_error("render_latex: unknown binary operator: " + o3);
}

Table gen_mathexpr(int n, std::uint64_t seed) {
    require(n >= 1, "gen_mathexpr: n must be >= 1");
    Table table(mathexpr_schema());
    table.resize(static_cast<std::size_t>(n));
    const auto w1 = discrete_gaussian_weights(0.0, 0.1, 61, 3.0, 1.0);
    const auto w2 = discrete_gaussian_weights(3.0, 0.1, 71, 6.5, 1.0);
    for (int i = 0; i < n; ++i) {
        Rng rng = make_rng(seed, 0x4d455850ull, static_cast<std::uint64_t>(i));
        const double x1 = 0.0 + 0.1 * sample_weighted(w1.data(), 61, rng);
        const double x2 = 3.0 + 0.1 * sample_weighted(w2.data(), 71, rng);
        const std::string o1 = kUnaryOps[sample_weighted(kO1Prior, 9, rng)];
        const std::string o2 = kUnaryOps[sample_weighted(kO2Prior, 9, rng)];
        const std::string o3 = kBinaryOps[sample_weighted(kO3Prior, 4, rng)];
        table.set_num(i, 0, x1);
        table.set_num(i, 1, x2);
        table.set_str(i, 2, o1);
        table.set_str(i, 3, o2);
        table.set_str(i, 4, o3);
        table.set_str(i, 5, render_latex(x1, x2, o1, o2, o3));
    }
    return table;
}

namespace {

struct Prior {
    const char* value;
    double p;
};

constexpr Prior kBirthStates[] = {
    {"California", 0.15}, {"New York", 0.12}, {"Texas", 0.12},     {"Florida", 0.10},
    {"Illinois", 0.08},   {"Washington", 0.08}, {"Massachusetts", 0.07}, {"Colorado", 0.07},
    {"Georgia", 0.11},    {"Arizona", 0.10},
};

constexpr Prior kColleges[] = {
    {"Stanford University", 0.05},
    {"Harvard University", 0.05},
    {"University of California, Berkeley", 0.05},
    {"University of Michigan", 0.07},
    {"Arizona State University", 0.20},
    {"University of Central Florida", 0.15},
    {"Santa Monica College", 0.15},
    {"Houston Community College", 0.15},
    {"Ohio State University", 0.13},
};

constexpr const char* kDegrees[] = {"associate", "bachelor", "master", "doctoral"};
constexpr double kDegreeElite[] = {0.01, 0.29, 0.40, 0.30};
constexpr double kDegreeOther[] = {0.30, 0.50, 0.15, 0.05};

constexpr const char* kOccupations[] = {
    "software developer",
    "research specialist",
    "healthcare practitioner",
    "business operations analyst",
    "education professional",
    "creative content professional",
    "technical services specialist",
    "construction professional",
    "customer services professional",
    "public services coordinator",
};
constexpr int kNumOccupations = 10;

bool is_elite(const std::string& college) {
    return college == "Stanford University" || college == "Harvard University" ||
           college == "University of California, Berkeley";
}

// base weight 1 per occupation; named occupations get their weight overwritten
std::vector<double> occupation_weights(const std::string& degree) {
    std::vector<double> w(kNumOccupations, 1.0);
    if (degree == "doctoral") {
        w[1] = 6.0;  // research specialist
        w[4] = 4.0;  // education professional
    } else if (degree == "associate") {
        w[8] = 5.0;  // customer services professional
        w[7] = 5.0;  // construction professional
    }
    return w;
}

int sample_prior(const Prior* priors, int n, Rng& rng) {
    double u = uniform01(rng);
    for (int i = 0; i < n; ++i) {
        u -= priors[i].p;
        if (u < 0.0) return i;
    }
    return n - 1;
}

}  // namespace

TableSchema profilebio_schema() {
    TableSchema s;
    s.dataset = "profilebio";
    std::vector<std::string> states, colleges;
    for (const auto& p : kBirthStates) states.push_back(p.value);
    for (const auto& p : kColleges) colleges.push_back(p.value);
    s.columns = {
        {"age", ColumnKind::Numerical, {}, 0},
        {"salary", ColumnKind::Numerical, {}, 0},
        {"sex", ColumnKind::Categorical, {"male", "female"}, -1},
        {"birth_state", ColumnKind::Categorical, states, -1},
        {"college", ColumnKind::Categorical, colleges, -1},
        {"degree", ColumnKind::Categorical,
         {std::begin(kDegrees), std::end(kDegrees)}, -1},
        {"occupation", ColumnKind::Categorical,
         {std::begin(kOccupations), std::end(kOccupations)}, -1},
        {"biography", ColumnKind::Text, {}, -1},
    };
    return s;
}

int salary_model_with_noise(int age, const std::string& degree, const std::string& occupation,
                            double noise) {
    require(age >= 21 && age <= 65, "salary_model: age must be in [21,65]");
    double salary = 85.0;
    if (degree == "master") salary += 30.0;
    if (degree == "doctoral") salary += 50.0;
    if (occupation == "software developer" || occupation == "healthcare practitioner") {
        salary += 25.0;
    }
    salary += 1.2 * (age - 21);
    salary += noise;
    const long rounded = std::lround(salary);
    return static_cast<int>(std::clamp(rounded, 75l, 200l));
}

int salary_model(int age, const std::string& degree, const std::string& occupation, Rng& rng) {
    return salary_model_with_noise(age, degree, occupation, 15.0 * normal01(rng));
}

std::string age_descriptor(int age) {
    if (age <= 25) return "in the early stage of adulthood";
    if (age <= 30) return "in an early phase of career development";
    if (age <= 40) return "in a career-building stage";
    if (age <= 50) return "at an established professional stage";
    if (age <= 60) return "in an advanced career stage";
    return "at the late career stage";
}

std::string salary_descriptor(int salary) {
    if (salary <= 110) return "a comfortable, stable income";
    if (salary <= 150) return "a strong professional income";
    return "a high-level executive income";
}

std::string render_biography(int age, int salary, const std::string& sex,
                             const std::string& birth_state, const std::string& college,
                             const std::string& degree, const std::string& occupation) {
    const std::string pronoun = (sex == "male") ? "He" : "She";
    std::string bio = "This " + sex + " individual is " + age_descriptor(age) + ". ";
    bio += pronoun + " was born in " + birth_state + " and completed higher education at " +
           college + ", earning a " + degree + " degree. ";
    bio += pronoun + " works as a " + occupation + ". ";
    bio += pronoun + " earns " + salary_descriptor(salary) + ".";
    return bio;
}

Table gen_profilebio(int n, std::uint64_t seed) {
    require(n >= 1, "gen_profilebio: n must be >= 1");
    Table table(profilebio_schema());
    table.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng = make_rng(seed, 0x50524f46ull, static_cast<std::uint64_t>(i));
        const std::string sex = (uniform01(rng) < 0.5) ? "male" : "female";
        const std::string state = kBirthStates[sample_prior(kBirthStates, 10, rng)].value;
        const std::string college = kColleges[sample_prior(kColleges, 9, rng)].value;
        const double* degree_prior = is_elite(college) ? kDegreeElite : kDegreeOther;
        const std::string degree = kDegrees[sample_weighted(degree_prior, 4, rng)];
        const auto occ_w = occupation_weights(degree);
        const std::string occupation = kOccupations[sample_weighted(occ_w.data(), 10, rng)];
        const int age = 21 + static_cast<int>(uniform_index(rng, 45));
        const int salary = salary_model(age, degree, occupation, rng);
        table.set_num(i, 0, age);
        table.set_num(i, 1, salary);
        table.set_str(i, 2, sex);
        table.set_str(i, 3, state);
        table.set_str(i, 4, college);
        table.set_str(i, 5, degree);
        table.set_str(i, 6, occupation);
        table.set_str(i, 7,
                      render_biography(age, salary, sex, state, college, degree, occupation));
    }
    return table;
}

Table gen_dataset(const std::string& name, int n, std::uint64_t seed) {
    if (name == "mathexpr") return gen_mathexpr(n, seed);
    if (name == "profilebio") return gen_profilebio(n, seed);
    throw std::runtime_error("unknown dataset: " + name);
}

}  // namespace tabgen
