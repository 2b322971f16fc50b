#include "dxcast/config.hpp"
#include "dxcast/csv.hpp"
#include "dxcast/ets.hpp"
#include "dxcast/evaluation.hpp"
#include "dxcast/factor_model.hpp"
#include "dxcast/hmd.hpp"
#include "dxcast/lifetable.hpp"
#include "dxcast/transforms.hpp"
#include "dxcast/types.hpp"
#include "dxcast/uncertainty.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace fs = std::filesystem;

using namespace dxcast;

namespace {

struct CliOptions {
    std::string data;
    std::vector<std::string> countries;
    std::vector<std::string> sex_names{"female", "male"};
    std::string transform;  // empty = per-command default
    std::string selector;   // empty = per-command default
    int test_len = 20;
    std::vector<double> alphas{0.2, 0.05};
    double rate = 0.0;
    bool rate_given = false;
    std::string rates_file = "config/rates.conf";
    bool rates_file_given = false;
    int horizon = 50;
    std::string out = ".";
    std::uint64_t seed = 0;
    int threads = 0;
    bool diagnostics = false;
    // synth only
    int n_years = 80;
    double drift = 0.2;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("cannot open '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("cannot write '" + path.string() + "'");
    out << text;
    out.flush();
    if (!out) throw DomainError("failed while writing '" + path.string() + "'");
}

fs::path prepare_out_dir(const std::string& out) {
    const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
    fs::create_directories(dir);
    return dir;
}

std::string population_label(const Panel& panel) {
    return panel.country + " " + to_string(panel.sex);
}

// ---------------------------------------------------------------------------
// Option resolution

std::vector<Sex> parse_sex_list(const std::vector<std::string>& names) {
    std::vector<Sex> sexes;
    for (const std::string& name : names) {
        const Sex sex = sex_from_string(name);
        if (std::find(sexes.begin(), sexes.end(), sex) == sexes.end()) sexes.push_back(sex);
    }
    if (sexes.empty()) throw DomainError("at least one sex must be requested");
    std::sort(sexes.begin(), sexes.end(),
              [](Sex a, Sex b) { return static_cast<int>(a) < static_cast<int>(b); });
    return sexes;
}

Selector selector_from_string(const std::string& text) {
    if (text == "evr") return Selector::evr();
    if (text.size() >= 2 && text[0] == 'k') {
        bool digits = true;
        for (std::size_t i = 1; i < text.size(); ++i)
            digits = digits && text[i] >= '0' && text[i] <= '9';
        if (digits) {
            const int k = std::stoi(text.substr(1));
            if (k >= 1) return Selector::fixed(k);
        }
    }
    throw DomainError("unknown selector '" + text + "' (expected evr or k<count>, e.g. k6)");
}

std::vector<Transform> parse_transform_list(const std::string& text, bool allow_both) {
    if (text == "both") {
        if (!allow_both) throw DomainError("transform 'both' is only valid for backtest");
        return {Transform::Clr, Transform::Cdf};
    }
    return {transform_from_string(text)};
}

std::vector<Selector> parse_selector_list(const std::string& text, bool allow_both) {
    if (text == "both") {
        if (!allow_both) throw DomainError("selector 'both' is only valid for backtest");
        return {Selector::evr(), Selector::fixed(6)};
    }
    return {selector_from_string(text)};
}

void check_alphas(const std::vector<double>& alphas) {
    if (alphas.empty()) throw DomainError("at least one --alpha level is required");
    for (const double alpha : alphas)
        if (!(alpha > 0.0 && alpha < 1.0))
            throw DomainError("alpha must lie strictly between 0 and 1, got " +
                              format_shortest(alpha));
}

std::map<std::string, double> load_rates(const CliOptions& options) {
    const fs::path path(options.rates_file);
    if (!fs::exists(path)) {
        if (options.rates_file_given)
            throw DomainError("rates file '" + options.rates_file + "' does not exist");
        return {};
    }
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open rates file '" + options.rates_file + "'");
    return parse_rates_file(in);
}

// The per-country discount rate: an explicit --rate wins, then the rates file.
std::optional<double> find_rate(const CliOptions& options, const std::map<std::string, double>& rates,
                                const std::string& country) {
    if (options.rate_given) return options.rate;
    const auto it = rates.find(country);
    if (it == rates.end()) return std::nullopt;
    return it->second;
}

RunConfig make_config(const CliOptions& options, const std::vector<Sex>& sexes,
                      const std::vector<Transform>& transforms,
                      const std::vector<Selector>& selectors,
                      const std::map<std::string, double>& rates) {
    RunConfig config;
    config.data_dir = options.data;
    config.countries = options.countries;
    config.sexes = sexes;
    config.transform = transforms.front();
    config.selector = selectors.front();
    config.test_len = options.test_len;
    config.alphas = options.alphas;
    config.rates = rates;
    config.horizon = options.horizon;
    config.out_dir = options.out;
    config.seed = options.seed;
    return config;
}

// Hash of the full run description: the resolved config plus the command and
// every (transform, selector) combination it sweeps.  The output directory is
// excluded so the same run written elsewhere produces identical files.
std::string run_hash(const RunConfig& config, const std::string& command,
                     const std::vector<Transform>& transforms,
                     const std::vector<Selector>& selectors, const std::string& extra = "") {
    RunConfig hashed = config;
    hashed.out_dir.clear();
    std::ostringstream stamp;
    stamp << describe(hashed);
    stamp << "command=" << command << '\n';
    stamp << "transforms=";
    for (std::size_t i = 0; i < transforms.size(); ++i)
        stamp << (i ? "," : "") << to_string(transforms[i]);
    stamp << "\nselectors=";
    for (std::size_t i = 0; i < selectors.size(); ++i)
        stamp << (i ? "," : "") << to_string(selectors[i]);
    stamp << '\n' << extra;
    return hash_hex(stamp.str());
}

// ---------------------------------------------------------------------------
// Data loading

struct LoadedData {
    std::vector<Panel> panels;
    std::vector<std::string> notes;  // dropped-year reports and similar
};

LoadedData load_panels(const std::string& data_path, const std::vector<std::string>& countries,
                       const std::vector<Sex>& sexes) {
    if (data_path.empty())
        throw DomainError("no data path given (pass --data or set DXCAST_DATA_DIR)");
    const fs::path root(data_path);
    if (!fs::exists(root)) throw DomainError("data path '" + data_path + "' does not exist");

    const auto country_wanted = [&countries](const std::string& code) {
        return countries.empty() ||
               std::find(countries.begin(), countries.end(), code) != countries.end();
    };
    const auto sex_wanted = [&sexes](Sex sex) {
        return std::find(sexes.begin(), sexes.end(), sex) != sexes.end();
    };

    LoadedData loaded;
    if (fs::is_regular_file(root)) {
        std::ifstream in(root);
        if (!in) throw DomainError("cannot open '" + data_path + "'");
        for (Panel& panel : read_dx_csv(in))
            if (country_wanted(panel.country) && sex_wanted(panel.sex))
                loaded.panels.push_back(std::move(panel));
    } else {
        const std::string female_suffix = ".fltper_1x1.txt";
        const std::string male_suffix = ".mltper_1x1.txt";
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(root))
            if (entry.is_regular_file()) files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const fs::path& file : files) {
            const std::string name = file.filename().string();
            std::string code;
            Sex sex = Sex::female;
            if (name.size() > female_suffix.size() && name.ends_with(female_suffix)) {
                code = name.substr(0, name.size() - female_suffix.size());
                sex = Sex::female;
            } else if (name.size() > male_suffix.size() && name.ends_with(male_suffix)) {
                code = name.substr(0, name.size() - male_suffix.size());
                sex = Sex::male;
            } else {
                continue;
            }
            if (!country_wanted(code) || !sex_wanted(sex)) continue;
            try {
                PanelBuildResult built = build_panel(parse_hmd_lifetable(slurp(file)), code, sex);
                if (!built.dropped_years.empty()) {
                    std::ostringstream note;
                    note << code << ' ' << to_string(sex) << ": dropped "
                         << built.dropped_years.size()
                         << " year(s) with missing death probabilities";
                    loaded.notes.push_back(note.str());
                }
                loaded.panels.push_back(std::move(built.panel));
            } catch (const std::exception& e) {
                throw DomainError(code + " " + to_string(sex) + " (" + name + "): " + e.what());
            }
        }
    }

    std::sort(loaded.panels.begin(), loaded.panels.end(), [](const Panel& a, const Panel& b) {
        if (a.country != b.country) return a.country < b.country;
        return static_cast<int>(a.sex) < static_cast<int>(b.sex);
    });
    if (loaded.panels.empty())
        throw DomainError("no populations found under '" + data_path +
                          "' matching the requested countries and sexes");
    return loaded;
}

// ---------------------------------------------------------------------------
// Parallel work queue: populations (or population x combo cells) are handed
// to a fixed pool; results land in per-task slots so aggregation stays
// single-threaded and deterministic.

void parallel_for(std::size_t n_tasks, int requested_threads,
                  const std::function<void(std::size_t)>& work) {
    if (n_tasks == 0) return;
    std::size_t n_threads = requested_threads > 0
                                ? static_cast<std::size_t>(requested_threads)
                                : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min(n_threads, n_tasks);
    std::vector<std::exception_ptr> errors(n_tasks);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) {
            try {
                work(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t w = 0; w < n_threads; ++w) {
            pool.emplace_back([&next, &errors, &work, n_tasks] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n_tasks) return;
                    try {
                        work(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (std::thread& thread : pool) thread.join();
    }
    for (const std::exception_ptr& error : errors)
        if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// ingest

int cmd_ingest(const CliOptions& options) {
    const std::vector<Sex> sexes = parse_sex_list(options.sex_names);
    const LoadedData loaded = load_panels(options.data, options.countries, sexes);
    const std::vector<Transform> transforms{Transform::Cdf};
    const std::vector<Selector> selectors{Selector::fixed(6)};
    const RunConfig config = make_config(options, sexes, transforms, selectors, {});
    const std::string hash = run_hash(config, "ingest", transforms, selectors);

    const fs::path dir = prepare_out_dir(options.out);
    std::ostringstream out;
    write_dx_csv(out, loaded.panels, {"config_hash=" + hash});
    write_text(dir / "dx.csv", out.str());

    for (const std::string& note : loaded.notes) std::cout << "note: " << note << '\n';
    for (const Panel& panel : loaded.panels)
        std::cout << "ingested " << population_label(panel) << ": " << panel.n_years()
                  << " years (" << panel.years.front() << ".." << panel.years.back() << ")\n";
    std::cout << "wrote " << (dir / "dx.csv").string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const CliOptions& options) {
    const std::vector<Sex> sexes = parse_sex_list(options.sex_names);
    const std::string country = options.countries.empty() ? "SYN" : options.countries.front();
    std::vector<Panel> panels;
    for (std::size_t i = 0; i < sexes.size(); ++i)
        panels.push_back(make_synthetic_panel(options.n_years, options.drift,
                                              options.seed + static_cast<std::uint64_t>(i),
                                              country, sexes[i]));

    const std::vector<Transform> transforms{Transform::Cdf};
    const std::vector<Selector> selectors{Selector::fixed(6)};
    const RunConfig config = make_config(options, sexes, transforms, selectors, {});
    std::ostringstream extra;
    extra << "n_years=" << options.n_years << "\ndrift=" << format_shortest(options.drift) << '\n';
    const std::string hash = run_hash(config, "synth", transforms, selectors, extra.str());

    const fs::path dir = prepare_out_dir(options.out);
    std::ostringstream out;
    write_dx_csv(out, panels, {"config_hash=" + hash});
    write_text(dir / "synthetic_dx.csv", out.str());

    for (const Panel& panel : panels)
        std::cout << "generated " << population_label(panel) << ": " << panel.n_years()
                  << " years (" << panel.years.front() << ".." << panel.years.back()
                  << "), drift=" << format_shortest(options.drift) << '\n';
    std::cout << "wrote " << (dir / "synthetic_dx.csv").string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// backtest

struct ModelCombo {
    Transform transform = Transform::Cdf;
    Selector selector = Selector::fixed(6);
};

struct BacktestCell {
    std::vector<PointErrorRow> point;
    std::vector<IntervalErrorRow> interval;  // grouped by alpha, config order
};

BacktestCell backtest_one(const Panel& panel, const ModelCombo& combo, int test_len,
                          const std::vector<double>& alphas) {
    BacktestCell cell;
    const WindowPlan plan = make_window_plan(panel.n_years(), test_len);
    const std::vector<SplitForecasts> forecasts =
        expanding_forecasts(panel, combo.transform, combo.selector, plan);
    cell.point = point_rows_from_forecasts(panel, forecasts, test_len);
    const Panel training = panel.first_years(panel.n_years() - test_len);
    const std::vector<ResidualSet> sets =
        validation_residuals(training, combo.transform, combo.selector);
    for (const double alpha : alphas) {
        const std::vector<HorizonCalibration> cals =
            calibrations_from_residuals(sets, alpha, test_len - 1);
        const std::vector<IntervalErrorRow> rows =
            interval_rows_from_forecasts(panel, forecasts, cals, alpha, test_len);
        cell.interval.insert(cell.interval.end(), rows.begin(), rows.end());
    }
    return cell;
}

int cmd_backtest(const CliOptions& options) {
    const std::vector<Sex> sexes = parse_sex_list(options.sex_names);
    const std::vector<Transform> transforms =
        parse_transform_list(options.transform.empty() ? "both" : options.transform, true);
    const std::vector<Selector> selectors =
        parse_selector_list(options.selector.empty() ? "both" : options.selector, true);
    check_alphas(options.alphas);

    const LoadedData loaded = load_panels(options.data, options.countries, sexes);
    const RunConfig config = make_config(options, sexes, transforms, selectors, {});
    const std::string hash = run_hash(config, "backtest", transforms, selectors);

    std::vector<ModelCombo> combos;
    for (const Transform transform : transforms)
        for (const Selector& selector : selectors) combos.push_back({transform, selector});

    const std::size_t n_tasks = loaded.panels.size() * combos.size();
    std::vector<BacktestCell> cells(n_tasks);
    parallel_for(n_tasks, options.threads, [&](std::size_t i) {
        const std::size_t p = i / combos.size();
        const std::size_t c = i % combos.size();
        const Panel& panel = loaded.panels[p];
        try {
            cells[i] = backtest_one(panel, combos[c], options.test_len, options.alphas);
        } catch (const std::exception& e) {
            throw DomainError("backtest " + population_label(panel) + " " +
                              to_string(combos[c].transform) + "/" +
                              to_string(combos[c].selector) + ": " + e.what());
        }
    });

    std::ostringstream point;
    point << "# config_hash=" << hash << '\n';
    point << "transform,selector,country,sex,h,kld,jsd\n";
    std::ostringstream interval;
    interval << "# config_hash=" << hash << '\n';
    interval << "transform,selector,country,sex,h,alpha,theta,ecp,cpd,mis\n";
    std::size_t n_point = 0, n_interval = 0;
    for (std::size_t c = 0; c < combos.size(); ++c) {
        const std::string combo_prefix =
            to_string(combos[c].transform) + "," + to_string(combos[c].selector) + ",";
        for (std::size_t p = 0; p < loaded.panels.size(); ++p) {
            const Panel& panel = loaded.panels[p];
            const std::string pop_prefix =
                combo_prefix + panel.country + "," + to_string(panel.sex) + ",";
            const BacktestCell& cell = cells[p * combos.size() + c];
            for (const PointErrorRow& row : cell.point) {
                point << pop_prefix << row.h << ',' << format_shortest(row.kld) << ','
                      << format_shortest(row.jsd) << '\n';
                ++n_point;
            }
            for (const IntervalErrorRow& row : cell.interval) {
                interval << pop_prefix << row.h << ',' << format_shortest(row.alpha) << ','
                         << format_shortest(row.theta) << ',' << format_shortest(row.ecp) << ','
                         << format_shortest(row.cpd) << ',' << format_shortest(row.mis) << '\n';
                ++n_interval;
            }
        }
    }

    const fs::path dir = prepare_out_dir(options.out);
    write_text(dir / "point_errors.csv", point.str());
    write_text(dir / "interval_errors.csv", interval.str());

    for (const std::string& note : loaded.notes) std::cout << "note: " << note << '\n';
    std::cout << "backtested " << loaded.panels.size() << " population(s) x " << combos.size()
              << " model combination(s), test_len=" << options.test_len << '\n';
    std::cout << "wrote " << (dir / "point_errors.csv").string() << " (" << n_point << " rows)\n";
    std::cout << "wrote " << (dir / "interval_errors.csv").string() << " (" << n_interval
              << " rows)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// forecast / annuity / life-expectancy

enum class ForecastMode { Full, AnnuityOnly, LifeExpectancyOnly };

struct PopulationForecast {
    Panel dx;  // forecast curves stacked as a panel
    std::vector<LifeExpectancyRow> life_expectancy;
    std::vector<AnnuityQuote> annuities;
    std::optional<double> rate;
    // One interval fan per alpha level; flags mark horizons priced with the
    // deepest calibrated theta rather than their own.
    std::vector<std::vector<IntervalForecast>> intervals;
    std::vector<std::vector<bool>> extrapolated;
    // Pre-rendered diagnostics rows (no headers), empty unless requested.
    std::string diag_ets, diag_components, diag_scores, diag_unconstrained;
};

constexpr int kMaxAge = 110;
const std::vector<int> kEntryAges{60, 65, 70, 75, 80, 85, 90, 95, 100, 105};
const std::vector<int> kMaturities{5, 10, 15, 20, 25, 30};
const std::vector<int> kLifeExpectancyAges{0, 60};

void render_diagnostics(PopulationForecast& result, const Panel& panel, Transform transform,
                        const Selector& selector) {
    const Panel floored = floor_panel(panel);
    const UnconstrainedMatrix unconstrained = transform == Transform::Clr
                                                  ? clr_forward(floored).first
                                                  : cdf_forward(floored);
    const FactorFit fit = fit_pca(unconstrained.matrix, selector);
    const std::string prefix = panel.country + "," + to_string(panel.sex) + ",";

    std::ostringstream ets, components, scores, values;
    for (int k = 0; k < fit.k; ++k) {
        const EtsModel model = select_ets(fit.scores.col(k));
        ets << prefix << (k + 1) << ',' << model.tag() << ',' << format_shortest(model.aicc)
            << ',' << format_shortest(model.alpha) << ',' << format_shortest(model.beta) << ','
            << format_shortest(model.phi) << '\n';
        for (Eigen::Index x = 0; x < fit.components.cols(); ++x)
            components << prefix << x << ',' << (k + 1) << ','
                       << format_shortest(fit.components(k, x)) << '\n';
        for (Eigen::Index t = 0; t < fit.scores.rows(); ++t)
            scores << prefix << unconstrained.years[static_cast<std::size_t>(t)] << ',' << (k + 1)
                   << ',' << format_shortest(fit.scores(t, k)) << '\n';
    }
    for (Eigen::Index t = 0; t < unconstrained.matrix.rows(); ++t)
        for (Eigen::Index x = 0; x < unconstrained.matrix.cols(); ++x)
            values << prefix << unconstrained.years[static_cast<std::size_t>(t)] << ',' << x << ','
                   << format_shortest(unconstrained.matrix(t, x)) << '\n';
    result.diag_ets = ets.str();
    result.diag_components = components.str();
    result.diag_scores = scores.str();
    result.diag_unconstrained = values.str();
}

PopulationForecast forecast_one(const Panel& panel, Transform transform, const Selector& selector,
                                int horizon, const std::vector<double>& alphas,
                                bool with_intervals, std::optional<double> rate,
                                bool diagnostics) {
    PopulationForecast result;
    const std::vector<DeathCurve> curves = run_pipeline(panel, transform, selector, horizon);

    result.dx.country = panel.country;
    result.dx.sex = panel.sex;
    result.dx.radix = panel.radix;
    result.dx.counts.resize(horizon, panel.n_ages());
    for (int h = 1; h <= horizon; ++h) {
        result.dx.counts.row(h - 1) = curves[static_cast<std::size_t>(h - 1)].counts.transpose();
        result.dx.years.push_back(curves[static_cast<std::size_t>(h - 1)].year);
    }

    result.life_expectancy = life_expectancy_table(curves, kLifeExpectancyAges);

    if (with_intervals) {
        // One nested validation pass serves every alpha level.
        const std::vector<ResidualSet> sets = validation_residuals(panel, transform, selector);
        for (const double alpha : alphas) {
            const std::vector<HorizonCalibration> cals =
                calibrations_from_residuals(sets, alpha, horizon);
            std::vector<IntervalForecast> fan;
            std::vector<bool> flags;
            fan.reserve(static_cast<std::size_t>(horizon));
            for (int h = 1; h <= horizon; ++h) {
                const HorizonCalibration& cal = cals[static_cast<std::size_t>(h - 1)];
                fan.push_back(build_interval(curves[static_cast<std::size_t>(h - 1)], cal.gamma,
                                             cal.theta, h, alpha));
                flags.push_back(cal.extrapolated);
            }
            result.intervals.push_back(std::move(fan));
            result.extrapolated.push_back(std::move(flags));
        }
    }

    if (with_intervals && rate) {
        result.rate = rate;
        // Interval bound curves, reused (sliced) for every entry age.
        std::vector<std::vector<DeathCurve>> lower(alphas.size()), upper(alphas.size());
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            for (int h = 1; h <= horizon; ++h) {
                DeathCurve lb = curves[static_cast<std::size_t>(h - 1)];
                DeathCurve ub = lb;
                lb.counts = result.intervals[a][static_cast<std::size_t>(h - 1)].lb;
                ub.counts = result.intervals[a][static_cast<std::size_t>(h - 1)].ub;
                lower[a].push_back(std::move(lb));
                upper[a].push_back(std::move(ub));
            }
        }
        for (const int entry : kEntryAges) {
            const int usable = std::min(horizon, kMaxAge - entry);
            if (usable < 1) continue;
            const std::vector<DeathCurve> point_slice(curves.begin(), curves.begin() + usable);
            const CohortSurvival survival = cohort_survival(point_slice, entry);
            for (const int maturity : kMaturities) {
                if (maturity > usable) continue;
                const AnnuityQuote base = annuity_price(survival, *rate, maturity);
                for (std::size_t a = 0; a < alphas.size(); ++a) {
                    const std::vector<DeathCurve> lb_slice(lower[a].begin(),
                                                           lower[a].begin() + usable);
                    const std::vector<DeathCurve> ub_slice(upper[a].begin(),
                                                           upper[a].begin() + usable);
                    const std::pair<double, double> bounds =
                        annuity_interval(lb_slice, ub_slice, entry, *rate, maturity);
                    AnnuityQuote quote = base;
                    quote.lb = bounds.first;
                    quote.ub = bounds.second;
                    quote.coverage = 1.0 - alphas[a];
                    result.annuities.push_back(quote);
                }
            }
        }
    }

    if (diagnostics) render_diagnostics(result, panel, transform, selector);
    return result;
}

int run_forecast_command(const CliOptions& options, ForecastMode mode) {
    const std::vector<Sex> sexes = parse_sex_list(options.sex_names);
    const std::vector<Transform> transforms =
        parse_transform_list(options.transform.empty() ? "cdf" : options.transform, false);
    const std::vector<Selector> selectors =
        parse_selector_list(options.selector.empty() ? "k6" : options.selector, false);
    check_alphas(options.alphas);
    if (options.horizon < 1) throw DomainError("horizon must be at least 1");

    const bool with_intervals = mode != ForecastMode::LifeExpectancyOnly;
    const std::map<std::string, double> rates = with_intervals ? load_rates(options)
                                                               : std::map<std::string, double>{};
    const LoadedData loaded = load_panels(options.data, options.countries, sexes);

    std::vector<std::optional<double>> pop_rates(loaded.panels.size());
    std::vector<std::string> rate_notes;
    if (with_intervals) {
        for (std::size_t p = 0; p < loaded.panels.size(); ++p) {
            pop_rates[p] = find_rate(options, rates, loaded.panels[p].country);
            if (!pop_rates[p]) {
                if (mode == ForecastMode::AnnuityOnly)
                    throw DomainError("no discount rate for country '" +
                                      loaded.panels[p].country +
                                      "' (add it to the rates file or pass --rate)");
                rate_notes.push_back(population_label(loaded.panels[p]) +
                                     ": no discount rate, skipping annuity quotes");
            }
        }
    }

    const RunConfig config = make_config(options, sexes, transforms, selectors, rates);
    const char* command = mode == ForecastMode::Full            ? "forecast"
                          : mode == ForecastMode::AnnuityOnly   ? "annuity"
                                                                : "life-expectancy";
    const std::string hash = run_hash(config, command, transforms, selectors);

    std::vector<PopulationForecast> results(loaded.panels.size());
    parallel_for(loaded.panels.size(), options.threads, [&](std::size_t p) {
        const Panel& panel = loaded.panels[p];
        try {
            results[p] = forecast_one(panel, transforms.front(), selectors.front(),
                                      options.horizon, options.alphas, with_intervals,
                                      pop_rates[p], options.diagnostics && mode == ForecastMode::Full);
        } catch (const std::exception& e) {
            throw DomainError(std::string(command) + " " + population_label(panel) + ": " +
                              e.what());
        }
    });

    const fs::path dir = prepare_out_dir(options.out);
    const std::string hash_line = "# config_hash=" + hash + "\n";
    std::vector<std::string> written;

    if (mode == ForecastMode::Full) {
        std::vector<Panel> panels;
        panels.reserve(results.size());
        for (const PopulationForecast& result : results) panels.push_back(result.dx);
        std::ostringstream out;
        write_dx_csv(out, panels, {"config_hash=" + hash});
        write_text(dir / "forecast_dx.csv", out.str());
        written.push_back("forecast_dx.csv");
    }

    if (mode == ForecastMode::Full || mode == ForecastMode::LifeExpectancyOnly) {
        std::ostringstream out;
        out << hash_line << "country,sex,year,age,ex\n";
        for (std::size_t p = 0; p < results.size(); ++p) {
            const std::string prefix =
                loaded.panels[p].country + "," + to_string(loaded.panels[p].sex) + ",";
            for (const LifeExpectancyRow& row : results[p].life_expectancy)
                out << prefix << row.year << ',' << row.age << ',' << format_shortest(row.ex)
                    << '\n';
        }
        write_text(dir / "life_expectancy.csv", out.str());
        written.push_back("life_expectancy.csv");
    }

    if (mode == ForecastMode::Full || mode == ForecastMode::AnnuityOnly) {
        std::ostringstream out;
        out << hash_line << "country,sex,entry_age,maturity,rate,price,lb,ub,coverage\n";
        std::size_t n_quotes = 0;
        for (std::size_t p = 0; p < results.size(); ++p) {
            const std::string prefix =
                loaded.panels[p].country + "," + to_string(loaded.panels[p].sex) + ",";
            for (const AnnuityQuote& quote : results[p].annuities) {
                out << prefix << quote.entry_age << ',' << quote.maturity << ','
                    << format_shortest(quote.rate) << ',' << format_shortest(quote.price) << ','
                    << format_shortest(quote.lb.value()) << ',' << format_shortest(quote.ub.value())
                    << ',' << format_shortest(quote.coverage) << '\n';
                ++n_quotes;
            }
        }
        if (n_quotes == 0 && mode == ForecastMode::Full) {
            std::cout << "note: no discount rates resolved, skipping annuities.csv "
                         "(pass --rate or --rates-file)\n";
        } else {
            write_text(dir / "annuities.csv", out.str());
            written.push_back("annuities.csv");
        }
    }

    if (mode == ForecastMode::Full) {
        std::ostringstream out;
        out << hash_line << "country,sex,year,age,alpha,lb,ub,extrapolated\n";
        for (std::size_t p = 0; p < results.size(); ++p) {
            const PopulationForecast& result = results[p];
            const std::string prefix =
                loaded.panels[p].country + "," + to_string(loaded.panels[p].sex) + ",";
            for (std::size_t a = 0; a < result.intervals.size(); ++a) {
                const std::string alpha_text = format_shortest(options.alphas[a]);
                for (std::size_t h = 0; h < result.intervals[a].size(); ++h) {
                    const IntervalForecast& fan = result.intervals[a][h];
                    const int year = result.dx.years[h];
                    const char* flag = result.extrapolated[a][h] ? "1" : "0";
                    for (Eigen::Index x = 0; x < fan.lb.size(); ++x)
                        out << prefix << year << ',' << x << ',' << alpha_text << ','
                            << format_fixed(fan.lb(x), 6) << ',' << format_fixed(fan.ub(x), 6)
                            << ',' << flag << '\n';
                }
            }
        }
        write_text(dir / "forecast_intervals.csv", out.str());
        written.push_back("forecast_intervals.csv");
    }

    if (options.diagnostics && mode == ForecastMode::Full) {
        const struct {
            const char* file;
            const char* header;
            std::string PopulationForecast::*rows;
        } dumps[] = {
            {"ets_models.csv", "country,sex,component,model,aicc,alpha,beta,phi",
             &PopulationForecast::diag_ets},
            {"components.csv", "country,sex,age,component,loading",
             &PopulationForecast::diag_components},
            {"scores.csv", "country,sex,year,component,score", &PopulationForecast::diag_scores},
            {"unconstrained.csv", "country,sex,year,age,value",
             &PopulationForecast::diag_unconstrained},
        };
        for (const auto& dump : dumps) {
            std::ostringstream out;
            out << hash_line << dump.header << '\n';
            for (const PopulationForecast& result : results) out << result.*(dump.rows);
            write_text(dir / dump.file, out.str());
            written.push_back(dump.file);
        }
    }

    for (const std::string& note : loaded.notes) std::cout << "note: " << note << '\n';
    for (const std::string& note : rate_notes) std::cout << "note: " << note << '\n';
    std::cout << command << ": " << loaded.panels.size() << " population(s), "
              << to_string(transforms.front()) << "/" << to_string(selectors.front())
              << ", horizon=" << options.horizon << '\n';
    for (const std::string& file : written) std::cout << "wrote " << (dir / file).string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forecasts of the age distribution of life-table deaths, with life-table "
                 "summaries and temporary-annuity prices"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a key=value file (flags win)");

    CliOptions options;
    app.add_option("--data", options.data,
                   "Canonical dx CSV file, or a directory of <CODE>.fltper_1x1.txt / "
                   "<CODE>.mltper_1x1.txt period life tables")
        ->envname("DXCAST_DATA_DIR");
    app.add_option("--countries", options.countries, "Country codes to keep (default: all found)")
        ->delimiter(',');
    app.add_option("--sexes", options.sex_names, "Sexes to keep: female, male")
        ->delimiter(',')
        ->capture_default_str();
    app.add_option("--transform", options.transform,
                   "Share transform: clr, cdf, or both (backtest only; default cdf, backtest both)");
    app.add_option("--selector", options.selector,
                   "Component-count rule: evr, k<count>, or both (backtest only; default k6, "
                   "backtest both)");
    app.add_option("--test-len", options.test_len, "Held-out years for backtesting")
        ->capture_default_str();
    app.add_option("--alpha", options.alphas, "Interval significance levels")
        ->delimiter(',')
        ->capture_default_str();
    CLI::Option* rate_opt =
        app.add_option("--rate", options.rate, "Flat discount rate overriding the rates file");
    CLI::Option* rates_file_opt =
        app.add_option("--rates-file", options.rates_file,
                       "Per-country discount rates, CODE = rate lines")
            ->capture_default_str();
    app.add_option("--horizon", options.horizon, "Forecast years ahead")->capture_default_str();
    app.add_option("--out", options.out, "Output directory")->capture_default_str();
    app.add_option("--seed", options.seed, "Seed for synthetic data")->capture_default_str();
    app.add_option("--threads", options.threads, "Worker threads (0 = hardware default)")
        ->capture_default_str();

    CLI::App* ingest = app.add_subcommand("ingest", "Read life tables, write the canonical dx CSV");
    CLI::App* backtest = app.add_subcommand(
        "backtest", "Expanding-window point and interval accuracy over model combinations");
    CLI::App* forecast = app.add_subcommand(
        "forecast", "Forecast death curves with calibrated intervals, life expectancies, and "
                    "annuity quotes");
    forecast->add_flag("--diagnostics", options.diagnostics,
                       "Also dump components, scores, trend-model fits, and the unconstrained "
                       "representation");
    CLI::App* annuity =
        app.add_subcommand("annuity", "Temporary annuity quotes from forecast curves");
    CLI::App* life_expectancy =
        app.add_subcommand("life-expectancy", "Period life expectancies from forecast curves");
    CLI::App* synth = app.add_subcommand("synth", "Write a synthetic death-count panel");
    synth->add_option("--n-years", options.n_years, "Years of synthetic history (at least 30)")
        ->capture_default_str();
    synth->add_option("--drift", options.drift, "Upward drift of the modal age per year")
        ->capture_default_str();

    for (CLI::App* sub : {ingest, backtest, forecast, annuity, life_expectancy, synth})
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    options.rate_given = rate_opt->count() > 0;
    options.rates_file_given = rates_file_opt->count() > 0;

    try {
        if (app.got_subcommand(ingest)) return cmd_ingest(options);
        if (app.got_subcommand(backtest)) return cmd_backtest(options);
        if (app.got_subcommand(forecast)) return run_forecast_command(options, ForecastMode::Full);
        if (app.got_subcommand(annuity))
            return run_forecast_command(options, ForecastMode::AnnuityOnly);
        if (app.got_subcommand(life_expectancy))
            return run_forecast_command(options, ForecastMode::LifeExpectancyOnly);
        if (app.got_subcommand(synth)) return cmd_synth(options);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
