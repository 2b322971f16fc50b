#include "dxcast/config.hpp"

#include "dxcast/csv.hpp"

#include <istream>
#include <sstream>

namespace dxcast {

std::map<std::string, double> parse_rates_file(std::istream& in) {
    std::map<std::string, double> rates;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream row(line);
        std::string code, eq;
        double rate;
        if (!(row >> code)) continue;  // blank line
        if (!(row >> eq) || eq != "=" || !(row >> rate)) {
            std::ostringstream msg;
            msg << "rates file line " << line_no << ": expected 'CODE = rate'";
            throw ParseError(msg.str());
        }
        if (rate < 0) {
            std::ostringstream msg;
            msg << "rates file line " << line_no << ": negative rate for " << code;
            throw ParseError(msg.str());
        }
        rates[code] = rate;
    }
    return rates;
}

std::string describe(const RunConfig& config) {
    std::ostringstream out;
    out << "data_dir=" << config.data_dir << "\n";
    out << "countries=";
    for (std::size_t i = 0; i < config.countries.size(); ++i)
        out << (i ? "," : "") << config.countries[i];
    out << "\nsexes=";
    for (std::size_t i = 0; i < config.sexes.size(); ++i)
        out << (i ? "," : "") << to_string(config.sexes[i]);
    out << "\ntransform=" << to_string(config.transform);
    out << "\nselector=" << to_string(config.selector);
    out << "\ntest_len=" << config.test_len;
    out << "\nalphas=";
    for (std::size_t i = 0; i < config.alphas.size(); ++i)
        out << (i ? "," : "") << format_shortest(config.alphas[i]);
    out << "\nrates=";
    bool first = true;
    for (const auto& [code, rate] : config.rates) {
        out << (first ? "" : ",") << code << ":" << format_shortest(rate);
        first = false;
    }
    out << "\nhorizon=" << config.horizon;
    out << "\nout_dir=" << config.out_dir;
    out << "\nseed=" << config.seed << "\n";
    return out.str();
}

std::uint64_t config_hash(const RunConfig& config) {
    return fnv1a64(describe(config));
}

}  // namespace dxcast
