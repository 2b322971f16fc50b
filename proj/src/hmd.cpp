#include "dxcast/hmd.hpp"

#include "dxcast/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace dxcast {

namespace {

const char* const kColumnNames[10] = {"Year", "Age", "mx", "qx", "ax",
                                      "lx",   "dx",  "Lx", "Tx", "ex"};

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> tokens;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

std::optional<double> parse_field(const std::string& token, int line_no, const char* column) {
    if (token == ".") return std::nullopt;
    char* end = nullptr;
    const double value = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') {
        std::ostringstream msg;
        msg << "line " << line_no << ": non-numeric " << column << " field '" << token << "'";
        throw ParseError(msg.str());
    }
    return value;
}

int parse_int(const std::string& token, int line_no, const char* column) {
    char* end = nullptr;
    const long value = std::strtol(token.c_str(), &end, 10);
    if (end == token.c_str() || *end != '\0') {
        std::ostringstream msg;
        msg << "line " << line_no << ": non-numeric " << column << " field '" << token << "'";
        throw ParseError(msg.str());
    }
    return static_cast<int>(value);
}

int parse_age(const std::string& token, int line_no) {
    if (!token.empty() && token.back() == '+')
        return parse_int(token.substr(0, token.size() - 1), line_no, "Age");
    return parse_int(token, line_no, "Age");
}

std::string field_text(const std::optional<double>& value) {
    return value ? format_shortest(*value) : std::string(".");
}

}  // namespace

std::vector<LifeTableRow> parse_hmd_lifetable(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool header_seen = false;

    std::vector<LifeTableRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tokens = split_ws(line);
        if (tokens.empty()) continue;
        if (!header_seen) {
            if (tokens[0] == "Year") {
                if (tokens.size() != 10)
                    throw ParseError("column header must have 10 columns Year Age mx qx ax lx dx Lx Tx ex");
                for (int i = 0; i < 10; ++i) {
                    if (tokens[static_cast<std::size_t>(i)] != kColumnNames[i])
                        throw ParseError(std::string("unexpected column '") +
                                         tokens[static_cast<std::size_t>(i)] + "', expected '" +
                                         kColumnNames[i] + "'");
                }
                header_seen = true;
            }
            continue;  // preamble line
        }
        if (tokens.size() != 10) {
            std::ostringstream msg;
            msg << "line " << line_no << ": expected 10 fields, got " << tokens.size();
            throw ParseError(msg.str());
        }
        LifeTableRow row;
        row.year = parse_int(tokens[0], line_no, "Year");
        row.age = parse_age(tokens[1], line_no);
        row.mx = parse_field(tokens[2], line_no, "mx");
        row.qx = parse_field(tokens[3], line_no, "qx");
        row.ax = parse_field(tokens[4], line_no, "ax");
        row.lx = parse_field(tokens[5], line_no, "lx");
        row.dx = parse_field(tokens[6], line_no, "dx");
        row.Lx = parse_field(tokens[7], line_no, "Lx");
        row.Tx = parse_field(tokens[8], line_no, "Tx");
        row.ex = parse_field(tokens[9], line_no, "ex");
        rows.push_back(row);
    }
    if (!header_seen)
        throw ParseError("missing column header line (Year Age mx qx ax lx dx Lx Tx ex)");

    // Every year block must list ages 0..110 in order.
    std::size_t i = 0;
    while (i < rows.size()) {
        const int year = rows[i].year;
        std::size_t j = i;
        while (j < rows.size() && rows[j].year == year) ++j;
        if (j - i != static_cast<std::size_t>(kHmdAgeCount)) {
            std::ostringstream msg;
            msg << "year " << year << ": expected " << kHmdAgeCount << " ages, got " << (j - i);
            throw ParseError(msg.str());
        }
        for (std::size_t k = i; k < j; ++k) {
            if (rows[k].age != static_cast<int>(k - i)) {
                std::ostringstream msg;
                msg << "year " << year << ": ages not contiguous 0..110";
                throw ParseError(msg.str());
            }
        }
        i = j;
    }
    return rows;
}

std::string write_hmd_lifetable(const std::vector<LifeTableRow>& rows, const std::string& title) {
    std::ostringstream out;
    out << title << "\n\n";
    out << "  Year          Age    mx    qx    ax    lx    dx    Lx    Tx    ex\n";
    for (const auto& row : rows) {
        out << "  " << row.year << "  " << row.age << (row.age == kHmdAgeCount - 1 ? "+" : "");
        for (const auto* field : {&row.mx, &row.qx, &row.ax, &row.lx, &row.dx, &row.Lx, &row.Tx,
                                  &row.ex})
            out << "  " << field_text(*field);
        out << "\n";
    }
    return out.str();
}

DeathCurve rebuild_death_counts(const Eigen::Ref<const Eigen::VectorXd>& qx, double radix) {
    const Eigen::Index n = qx.size();
    if (n < 1) throw DomainError("rebuild_death_counts: empty qx");
    if (!(radix > 0)) throw DomainError("rebuild_death_counts: radix must be positive");
    for (Eigen::Index x = 0; x + 1 < n; ++x) {
        if (!(qx[x] >= 0.0 && qx[x] <= 1.0)) {
            std::ostringstream msg;
            msg << "qx at age " << x << " is " << qx[x] << ", outside [0,1]";
            throw DomainError(msg.str());
        }
    }
    DeathCurve curve;
    curve.radix = radix;
    curve.counts.resize(n);
    double survivors = radix;
    for (Eigen::Index x = 0; x + 1 < n; ++x) {
        const double deaths = survivors * qx[x];
        curve.counts[x] = deaths;
        survivors -= deaths;
    }
    curve.counts[n - 1] = survivors;  // open class: q forced to 1
    return curve;
}

Eigen::VectorXd normalize_to_density(const Eigen::Ref<const Eigen::VectorXd>& counts) {
    const double sum = counts.sum();
    if (!(sum > 0)) throw DomainError("cannot normalize a curve with non-positive mass");
    return counts / sum;
}

Eigen::VectorXd normalize_to_density(const DeathCurve& curve) {
    return normalize_to_density(curve.counts);
}

PanelBuildResult build_panel(const std::vector<LifeTableRow>& rows, const std::string& country,
                             Sex sex, double radix) {
    std::map<int, Eigen::VectorXd> qx_by_year;
    std::map<int, bool> complete;
    for (const auto& row : rows) {
        if (row.age < 0 || row.age >= kHmdAgeCount) continue;
        auto [it, inserted] = qx_by_year.try_emplace(row.year, Eigen::VectorXd(kHmdAgeCount));
        if (inserted) complete[row.year] = true;
        if (row.qx)
            it->second[row.age] = *row.qx;
        else
            complete[row.year] = false;
    }

    PanelBuildResult result;
    std::vector<Eigen::VectorXd> kept;
    for (const auto& [year, qx] : qx_by_year) {
        if (!complete[year]) {
            result.dropped_years.push_back(year);
            continue;
        }
        result.panel.years.push_back(year);
        kept.push_back(rebuild_death_counts(qx, radix).counts);
    }
    if (kept.size() < 2)
        throw DomainError("panel for " + country + " " + to_string(sex) +
                          " has fewer than two usable years");

    result.panel.country = country;
    result.panel.sex = sex;
    result.panel.radix = radix;
    result.panel.counts.resize(static_cast<Eigen::Index>(kept.size()), kHmdAgeCount);
    for (std::size_t t = 0; t < kept.size(); ++t)
        result.panel.counts.row(static_cast<Eigen::Index>(t)) = kept[t];
    validate_panel(result.panel);
    return result;
}

void write_dx_csv(std::ostream& out, const std::vector<Panel>& panels,
                  const std::vector<std::string>& comments) {
    for (const auto& comment : comments) out << "# " << comment << "\n";
    out << "country,sex,year,age,dx\n";
    for (const auto& panel : panels) {
        for (Eigen::Index t = 0; t < panel.n_years(); ++t) {
            for (Eigen::Index age = 0; age < panel.n_ages(); ++age) {
                out << panel.country << ',' << to_string(panel.sex) << ','
                    << panel.years[static_cast<std::size_t>(t)] << ',' << age << ','
                    << format_fixed(panel.counts(t, age), 6) << "\n";
            }
        }
    }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    return fields;
}

}  // namespace

std::vector<Panel> read_dx_csv(std::istream& in, double radix) {
    std::string line;
    int line_no = 0;
    bool header_seen = false;

    struct Key {
        std::string country;
        Sex sex;
    };
    std::vector<Key> order;
    std::map<std::pair<std::string, int>, std::map<int, std::vector<std::pair<int, double>>>> data;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "country,sex,year,age,dx")
                throw ParseError("expected header 'country,sex,year,age,dx'");
            header_seen = true;
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != 5) {
            std::ostringstream msg;
            msg << "line " << line_no << ": expected 5 fields, got " << fields.size();
            throw ParseError(msg.str());
        }
        const Sex sex = sex_from_string(fields[1]);
        const int year = parse_int(fields[2], line_no, "year");
        const int age = parse_int(fields[3], line_no, "age");
        const auto dx = parse_field(fields[4], line_no, "dx");
        if (!dx) {
            std::ostringstream msg;
            msg << "line " << line_no << ": missing dx value";
            throw ParseError(msg.str());
        }
        const auto key = std::make_pair(fields[0], static_cast<int>(sex));
        if (!data.count(key)) order.push_back({fields[0], sex});
        data[key][year].emplace_back(age, *dx);
    }
    if (!header_seen) throw ParseError("empty dx csv");

    std::vector<Panel> panels;
    for (const auto& key : order) {
        const auto& years = data.at({key.country, static_cast<int>(key.sex)});
        Eigen::Index n_ages = -1;
        Panel panel;
        panel.country = key.country;
        panel.sex = key.sex;
        panel.radix = radix;
        std::vector<Eigen::VectorXd> rows;
        for (const auto& [year, cells] : years) {
            Eigen::Index ages = static_cast<Eigen::Index>(cells.size());
            if (n_ages < 0)
                n_ages = ages;
            else if (ages != n_ages)
                throw ParseError(key.country + " " + to_string(key.sex) + " year " +
                                 std::to_string(year) + ": inconsistent age count");
            Eigen::VectorXd row(n_ages);
            row.setConstant(std::nan(""));
            for (const auto& [age, dx] : cells) {
                if (age < 0 || age >= n_ages)
                    throw ParseError(key.country + " year " + std::to_string(year) +
                                     ": age " + std::to_string(age) + " out of range");
                row[age] = dx;
            }
            if (row.hasNaN())
                throw ParseError(key.country + " year " + std::to_string(year) +
                                 ": ages not contiguous");
            panel.years.push_back(year);
            rows.push_back(std::move(row));
        }
        panel.counts.resize(static_cast<Eigen::Index>(rows.size()), n_ages);
        for (std::size_t t = 0; t < rows.size(); ++t)
            panel.counts.row(static_cast<Eigen::Index>(t)) = rows[t];
        validate_panel(panel);
        panels.push_back(std::move(panel));
    }
    return panels;
}

}  // namespace dxcast
