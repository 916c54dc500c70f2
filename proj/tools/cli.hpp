#pragma once

#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "classb/classb.hpp"
#include "family_io.hpp"

namespace classb::cli {

/// Exit codes: success, computation error, usage error.
inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_usage = 2;

struct ParamInfo {
    const char* family;
    const char* params;
    const char* mean;
};

inline const std::vector<ParamInfo>& parameter_table() {
    static const std::vector<ParamInfo> table = {
        {"binomial", "n (trials, positive integer), p (success probability)", "x = n p"},
        {"poisson", "lambda (rate)", "x = lambda"},
        {"negative_binomial", "n (> 0), p (success probability)", "x = n (1 - p) / p"},
        {"normal", "alpha (mean), sigma2 (variance)", "x = alpha"},
        {"gamma", "alpha (rate), lambda (shape)", "x = lambda / alpha"},
        {"mvnormal", "alpha1..alpham (means), sigmaij for i <= j (covariances)", "x_i = alpha_i"},
        {"multinomial", "n (trials), p1..pm (cell probabilities, sum < 1)", "x_i = n p_i"},
        {"negative_multinomial", "n (> 0), p1..pm (odds, > 0)", "x_i = n p_i"},
        {"logarithmic", "theta (0 < theta < 1)", "x = -theta / ((1 - theta) log(1 - theta))"},
        {"mv_logarithmic", "theta1..thetam (sum T < 1)", "x_i = -theta_i / ((1 - T) log(1 - T))"},
        {"random_walk", "n (start, positive integer), p (left-step probability, 1/2 < p < 1)", "x = n / (2p - 1)"},
        {"borel_tanner", "n (ancestors, positive integer), alpha (offspring mean, 0 < alpha < 1)", "x = n / (1 - alpha)"},
    };
    return table;
}

/// Parameters used only to display the variance function in `families --describe`.
inline std::map<std::string, double> display_params(const std::string& name) {
    static const std::map<std::string, std::map<std::string, double>> table = {
        {"binomial", {{"n", 5}, {"p", 0.3}}},
        {"poisson", {{"lambda", 2}}},
        {"negative_binomial", {{"n", 3}, {"p", 0.4}}},
        {"normal", {{"alpha", 0}, {"sigma2", 1}}},
        {"gamma", {{"alpha", 2}, {"lambda", 3}}},
        {"mvnormal", {{"alpha1", 0}, {"alpha2", 0}, {"sigma11", 1}, {"sigma22", 1}, {"sigma12", 0}}},
        {"multinomial", {{"n", 4}, {"p1", 0.2}, {"p2", 0.3}}},
        {"negative_multinomial", {{"n", 3}, {"p1", 0.2}, {"p2", 0.3}}},
        {"logarithmic", {{"theta", 0.4}}},
        {"mv_logarithmic", {{"theta1", 0.2}, {"theta2", 0.3}}},
        {"random_walk", {{"n", 2}, {"p", 0.8}}},
        {"borel_tanner", {{"n", 2}, {"alpha", 0.5}}},
    };
    return table.at(name);
}

inline std::uint64_t seed_from_env() {
    if (const char* s = std::getenv("CLASSB_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(s, &end, 10);
        if (end == s || *end != '\0') throw ArgumentError("CLASSB_SEED must be a non-negative integer");
        return v;
    }
    return default_seed;
}

/// --family/--params or --vfile.
struct FamilyOptions {
    std::string family;
    std::vector<std::string> params;
    std::string vfile;

    void add(CLI::App* app, bool allow_file = true) {
        auto* fam = app->add_option("--family", family, "Built-in family name");
        app->add_option("--params", params, "Parameters as name=value pairs")->delimiter(',');
        if (allow_file) {
            auto* file = app->add_option("--vfile", vfile, "Family file (JSON)");
            fam->excludes(file);
        }
    }

    std::map<std::string, double> param_map() const { return parse_assignments(params); }

    FamilySpec load() const {
        if (!vfile.empty()) return load_family_file(vfile);
        if (family.empty()) throw ArgumentError("one of --family or --vfile is required");
        return builtin(family, param_map());
    }

    std::string require_name() const {
        if (family.empty()) throw ArgumentError("--family is required");
        return family;
    }
};

class Runner {
  public:
    Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

    int run(int argc, const char* const* argv) {
        CLI::App app{"Class-B exponential families: moments, transforms, Fisher information and tail bounds", "classb"};
        app.require_subcommand(1);
        app.fallthrough();
        app.add_option("--format", format_, "Output format")->check(CLI::IsMember({"json", "csv"}));
        build(app);
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            out_ << app.help();
            return exit_ok;
        } catch (const CLI::CallForAllHelp& e) {
            out_ << app.help("", CLI::AppFormatMode::All);
            return exit_ok;
        } catch (const CLI::ParseError& e) {
            err_ << "classb: " << e.what() << "\n";
            return exit_usage;
        }
        try {
            return action_();
        } catch (const ArgumentError& e) {
            err_ << "classb: " << e.what() << "\n";
            return exit_usage;
        } catch (const ParseError& e) {
            err_ << "classb: " << e.what() << "\n";
            return exit_usage;
        } catch (const std::exception& e) {
            err_ << "classb: " << e.what() << "\n";
            return exit_failure;
        }
    }

  private:
    bool csv() const { return format_ == "csv"; }

    void emit(const json& j) { out_ << j.dump(2) << "\n"; }

    CLI::App* sub(CLI::App& app, const std::string& name, const std::string& help, std::function<int()> action) {
        CLI::App* s = app.add_subcommand(name, help);
        s->callback([this, action = std::move(action)] { action_ = action; });
        return s;
    }

    void build(CLI::App& app) {
        add_families(app);
        add_moments(app, "moments", std::nullopt);
        add_moments(app, "cumulants", MomentKind::cumulant);
        add_verify(app);
        add_transform(app);
        add_fisher(app);
        add_tailbound(app);
        add_closedform(app);
        add_oracle(app);
        add_selftest(app);
    }

    // ---- families ----------------------------------------------------------------

    void add_families(CLI::App& app) {
        auto* s = sub(app, "families", "List built-in families", [this] {
            json list = json::array();
            for (const auto& info : parameter_table()) {
                json e;
                e["name"] = info.family;
                if (describe_) {
                    e["params"] = info.params;
                    e["mean"] = info.mean;
                    FamilySpec f = builtin(info.family, display_params(info.family));
                    e["mean_vars"] = f.mean_vars;
                    e["V"] = matrix_json(f.variance);
                    e["verified"] = f.verified;
                    if (!f.note.empty()) e["note"] = f.note;
                }
                list.push_back(e);
            }
            if (csv()) {
                out_ << (describe_ ? "name,params,mean\n" : "name\n");
                for (const auto& info : parameter_table()) {
                    out_ << info.family;
                    if (describe_) out_ << "," << csv_escape(info.params) << "," << csv_escape(info.mean);
                    out_ << "\n";
                }
            } else {
                emit(json{{"families", list}});
            }
            return exit_ok;
        });
        s->add_flag("--describe", describe_, "Show parameters, mean map and variance function");
    }

    // ---- moments -----------------------------------------------------------------

    void add_moments(CLI::App& app, const std::string& name, std::optional<MomentKind> fixed) {
        auto* s = sub(app, name, fixed ? "Cumulant table" : "Raw, central or cumulant table", [this, fixed] {
            const MomentKind kind = fixed ? *fixed : parse_moment_kind(kind_text_);
            FamilySpec f = family_.load();
            MomentTable t = build_table(f, kind, order_);
            std::optional<Vector> x;
            if (!at_.empty()) {
                x = parse_point(f, at_);
            } else if (!symbolic_ && !f.reference_mean.empty()) {
                x = f.reference_mean;
            }
            std::map<MultiIndex, double> values;
            if (x) values = evaluate_table_at(t, *x);
            if (csv()) {
                out_ << (x ? "k,value\n" : "k,expr\n");
                for (const auto& [k, e] : t.entries)
                    out_ << index_cell(k) << "," << (x ? csv_number(values.at(k)) : csv_escape(to_string(e))) << "\n";
                return exit_ok;
            }
            json j;
            j["kind"] = to_string(kind);
            j["family"] = f.name;
            j["order"] = order_;
            if (x) j["at"] = vector_json(*x);
            json entries = json::array();
            for (const auto& [k, e] : t.entries) {
                json row;
                row["k"] = index_json(k);
                row["expr"] = to_string(e);
                if (x) row["value"] = number(values.at(k));
                entries.push_back(row);
            }
            j["entries"] = entries;
            emit(j);
            return exit_ok;
        });
        if (!fixed) s->add_option("kind", kind_text_, "raw | central | cumulant")->required()->check(
            CLI::IsMember({"raw", "central", "cumulant"}));
        family_.add(s);
        s->add_option("--order", order_, "Highest order K")->check(CLI::Range(1u, 16u));
        auto* sym = s->add_flag("--symbolic", symbolic_, "Expressions only, no evaluation");
        s->add_option("--at", at_, "Mean point: x=2 or x1=1,x2=2 or 1,2")->delimiter(',')->excludes(sym);
    }

    // ---- verify ------------------------------------------------------------------

    void add_verify(CLI::App& app) {
        auto* s = sub(app, "verify", "Check the Laplace-transform equation on a grid", [this] {
            FamilySpec f = family_.load();
            GridSpec grid;
            grid.points = points_;
            grid.z = {z_lo_, z_hi_};
            ResidualReport r = verify_eq1(f, grid, tol_);
            if (csv()) {
                out_ << "z,x,residual\n";
                for (const auto& p : r.grid) {
                    auto join = [](const Vector& v) {
                        std::string s;
                        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + csv_number(v[i]);
                        return s;
                    };
                    out_ << join(p.z) << "," << join(p.x) << "," << join(p.residual) << "\n";
                }
            } else {
                json j;
                j["family"] = f.name;
                j["tol"] = tol_;
                j["max_abs"] = number(r.max_abs);
                j["pass"] = r.pass;
                j["skipped"] = r.skipped;
                json pts = json::array();
                for (const auto& p : r.grid)
                    pts.push_back(json{{"z", vector_json(p.z)}, {"x", vector_json(p.x)}, {"residual", vector_json(p.residual)}});
                j["grid"] = pts;
                emit(j);
            }
            if (!r.pass) err_ << "classb: residual check failed: max |residual| " << r.max_abs << " exceeds " << tol_ << "\n";
            return r.pass ? exit_ok : exit_failure;
        });
        family_.add(s);
        s->add_option("--points", points_, "Grid points per axis")->check(CLI::Range(2u, 50u));
        s->add_option("--tol", tol_, "Pass threshold on max |residual|");
        s->add_option("--zlo", z_lo_, "Lower end of the z range");
        s->add_option("--zhi", z_hi_, "Upper end of the z range");
    }

    // ---- transform ---------------------------------------------------------------

    void add_transform(CLI::App& app) {
        auto* s = sub(app, "transform", "Affine image, iid convolution or sample mean of a family", [this] {
            FamilySpec f = family_.load();
            FamilySpec g;
            if (!affine_.empty()) {
                g = affine(f, parse_matrix(affine_[0]), parse_shift(affine_[1]));
            } else if (convolve_) {
                g = convolve_iid(f, *convolve_);
            } else if (mean_) {
                g = sample_mean(f, *mean_);
            } else {
                throw ArgumentError("transform needs one of --affine, --convolve, --mean");
            }
            json j = family_json(g);
            if (verify_) {
                ResidualReport r = verify_eq1(g);
                j["verify"] = json{{"max_abs", number(r.max_abs)}, {"tol", r.tol}, {"pass", r.pass}, {"skipped", r.skipped}};
            }
            if (csv()) {
                out_ << "i,j,V\n";
                for (std::size_t a = 0; a < g.dim; ++a)
                    for (std::size_t b = 0; b < g.dim; ++b)
                        out_ << a << "," << b << "," << csv_escape(to_string(g.variance(a, b))) << "\n";
            } else {
                emit(j);
            }
            return exit_ok;
        });
        family_.add(s);
        auto* a = s->add_option("--affine", affine_, "Matrix rows 'a11,a12;a21,a22' and shift 'b1,b2'")->expected(2);
        auto* c = s->add_option("--convolve", convolve_, "Sum of n iid copies")->check(CLI::PositiveNumber);
        auto* m = s->add_option("--mean", mean_, "Mean of n iid copies")->check(CLI::PositiveNumber);
        a->excludes(c)->excludes(m);
        c->excludes(m);
        s->add_flag("--verify", verify_, "Also check the transformed Laplace transform");
    }

    static NumberMatrix parse_matrix(const std::string& text) {
        std::vector<std::vector<Number>> rows;
        std::stringstream ss(text);
        std::string row;
        while (std::getline(ss, row, ';')) {
            std::vector<Number> r;
            std::stringstream rs(row);
            std::string item;
            while (std::getline(rs, item, ',')) r.push_back(parse_number(item));
            rows.push_back(r);
        }
        if (rows.empty()) throw ArgumentError("--affine: empty matrix");
        NumberMatrix m(rows.size(), rows[0].size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows[0].size()) throw ArgumentError("--affine: ragged matrix");
            for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
        }
        return m;
    }

    static std::vector<Number> parse_shift(const std::string& text) {
        std::vector<Number> out;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_number(item));
        return out;
    }

    // ---- fisher ------------------------------------------------------------------

    void add_fisher(CLI::App& app) {
        auto* s = sub(app, "fisher", "Fisher information V(x)^{-1}", [this] {
            FamilySpec f = family_.load();
            Vector x;
            if (!at_.empty()) {
                x = parse_point(f, at_);
            } else if (!f.reference_mean.empty()) {
                x = f.reference_mean;
            } else {
                throw ArgumentError("fisher needs --at for families without a reference mean");
            }
            FisherResult r = fisher_info_report(f, x);
            if (csv()) {
                out_ << "i,j,value\n";
                for (std::size_t a = 0; a < f.dim; ++a)
                    for (std::size_t b = 0; b < f.dim; ++b) out_ << a << "," << b << "," << csv_number(r.info(a, b)) << "\n";
                return exit_ok;
            }
            json j;
            j["family"] = f.name;
            j["x"] = vector_json(x);
            j["info"] = matrix_json(r.info);
            j["condition"] = number(r.condition);
            if (symbolic_) j["symbolic"] = matrix_json(fisher_info_symbolic(f));
            emit(j);
            return exit_ok;
        });
        family_.add(s);
        s->add_option("--at", at_, "Mean point: x=2 or x1=1,x2=2 or 1,2")->delimiter(',');
        s->add_flag("--symbolic", symbolic_, "Include adj(V)/det(V) expressions");
    }

    // ---- tailbound ---------------------------------------------------------------

    static json tail_json(const TailReport& r) {
        json j;
        j["x"] = vector_json(r.x);
        j["y"] = vector_json(r.y);
        j["exponent_A"] = number(r.exponent_A);
        j["bound"] = number(r.bound);
        j["quadrature_error"] = number(r.quadrature_error);
        j["dual_exponent"] = r.dual_exponent ? number(*r.dual_exponent) : json(nullptr);
        j["dual_maximizer"] = r.dual_maximizer ? number(*r.dual_maximizer) : json(nullptr);
        j["oracle_tail"] = r.oracle_tail ? number(*r.oracle_tail) : json(nullptr);
        j["applicable"] = r.applicable == Applicability::unknown ? json(nullptr) : json(r.applicable == Applicability::yes);
        j["notes"] = r.notes;
        j["integrand"] = "(1-t) (y-x) V^{-1}(x + t(y-x)) (y-x)^T";
        return j;
    }

    void add_tailbound(CLI::App& app) {
        auto* s = sub(app, "tailbound", "Exponential tail bound exp(-A(y))", [this] {
            FamilySpec f = family_.load();
            Vector x;
            if (!x_text_.empty()) {
                x = parse_list(x_text_);
            } else if (!f.reference_mean.empty()) {
                x = f.reference_mean;
            } else {
                throw ArgumentError("tailbound needs --x for families without a reference mean");
            }
            std::vector<Vector> ys;
            if (!y_text_.empty()) ys.push_back(parse_list(y_text_));
            if (!grid_text_.empty()) {
                if (f.dim != 1) throw ArgumentError("--grid is for univariate families");
                const auto parts = split(grid_text_, ':');
                if (parts.size() != 3) throw ArgumentError("--grid expects lo:hi:count");
                const double lo = parse_double(parts[0]);
                const double hi = parse_double(parts[1]);
                const double count = parse_double(parts[2]);
                if (!(count >= 2 && count == std::floor(count))) throw ArgumentError("--grid count must be an integer >= 2");
                for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i)
                    ys.push_back({lo + (hi - lo) * double(i) / (count - 1)});
            }
            if (ys.empty()) throw ArgumentError("tailbound needs --y or --grid");
            std::vector<TailReport> reports;
            for (const auto& y : ys) {
                if (y.size() != f.dim) throw ArgumentError("y needs " + std::to_string(f.dim) + " coordinates");
                reports.push_back(tail_bound(f, x, y));
            }
            if (csv()) {
                out_ << "x,y,exponent_A,bound,quadrature_error,dual_exponent,oracle_tail,applicable\n";
                for (const auto& r : reports) {
                    auto join = [](const Vector& v) {
                        std::string s;
                        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + csv_number(v[i]);
                        return s;
                    };
                    out_ << join(r.x) << "," << join(r.y) << "," << csv_number(r.exponent_A) << "," << csv_number(r.bound)
                         << "," << csv_number(r.quadrature_error) << ","
                         << (r.dual_exponent ? csv_number(*r.dual_exponent) : "") << ","
                         << (r.oracle_tail ? csv_number(*r.oracle_tail) : "") << "," << to_string(r.applicable) << "\n";
                }
                return exit_ok;
            }
            if (grid_text_.empty() && reports.size() == 1) {
                json j = tail_json(reports[0]);
                j["family"] = f.name;
                emit(j);
            } else {
                json list = json::array();
                for (const auto& r : reports) list.push_back(tail_json(r));
                emit(json{{"family", f.name}, {"reports", list}});
            }
            return exit_ok;
        });
        family_.add(s);
        s->add_option("--x", x_text_, "Mean x (defaults to the family's reference mean)");
        auto* y = s->add_option("--y", y_text_, "Threshold y (comma-separated for m > 1)");
        auto* g = s->add_option("--grid", grid_text_, "Univariate y grid lo:hi:count");
        y->excludes(g);
    }

    static std::vector<std::string> split(const std::string& text, char sep) {
        std::vector<std::string> out;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, sep)) out.push_back(item);
        return out;
    }

    // ---- closedform --------------------------------------------------------------

    void add_closedform(CLI::App& app) {
        auto* s = app.add_subcommand("closedform", "Closed-form cumulants and Stirling numbers");
        s->require_subcommand(1);

        auto* q = sub(*s, "quadratic", "Cumulants for V = x(ax + b)", [this] {
            json entries = json::array();
            if (csv()) out_ << "order,value\n";
            for (unsigned k = 1; k + 1 <= order_; ++k) {
                const double v = cumulant_quadratic(a_, b_, x_, k);
                if (csv()) out_ << k + 1 << "," << csv_number(v) << "\n";
                entries.push_back(json{{"order", k + 1}, {"value", number(v)}});
            }
            if (!csv()) emit(json{{"form", "quadratic"}, {"a", a_}, {"b", b_}, {"x", x_}, {"entries", entries}});
            return exit_ok;
        });
        q->add_option("--a", a_, "Coefficient a")->required();
        q->add_option("--b", b_, "Coefficient b")->required();
        q->add_option("--x", x_, "Mean x")->required();
        q->add_option("--order", order_, "Highest cumulant order")->check(CLI::Range(2u, 64u));

        auto* r = sub(*s, "randomwalk", "First-passage cumulants sigma_{k+2}", [this] {
            json entries = json::array();
            if (csv()) out_ << (symbolic_ ? "order,expr\n" : "order,value\n");
            for (unsigned k = 0; k + 2 <= order_; ++k) {
                json e{{"order", k + 2}};
                if (symbolic_) {
                    const std::string text = to_string(randomwalk_cumulant_expr(k));
                    e["expr"] = text;
                    if (csv()) out_ << k + 2 << "," << csv_escape(text) << "\n";
                } else {
                    const double v = randomwalk_cumulant(n_, p_, k);
                    e["value"] = number(v);
                    if (csv()) out_ << k + 2 << "," << csv_number(v) << "\n";
                }
                entries.push_back(e);
            }
            if (!csv()) {
                json j{{"form", "randomwalk"}};
                if (!symbolic_) {
                    j["n"] = n_;
                    j["p"] = p_;
                    j["x"] = double(n_) / (2 * p_ - 1);
                }
                j["entries"] = entries;
                emit(j);
            }
            return exit_ok;
        });
        r->add_option("--n", n_, "Starting position")->check(CLI::PositiveNumber);
        r->add_option("--p", p_, "Left-step probability");
        r->add_option("--order", order_, "Highest cumulant order")->check(CLI::Range(2u, 40u));
        r->add_flag("--symbolic", symbolic_, "Expressions in x and n");

        auto* st = sub(*s, "stirling", "Stirling numbers of the second kind S(k, m)", [this] {
            json rows = json::array();
            if (csv()) out_ << "k,m,value\n";
            const unsigned lo = m_ ? *m_ : 0;
            const unsigned hi = m_ ? *m_ : k_;
            for (unsigned m = lo; m <= hi; ++m) {
                const std::string v = stirling2(k_, m).str();
                if (csv()) out_ << k_ << "," << m << "," << v << "\n";
                rows.push_back(json{{"k", k_}, {"m", m}, {"value", v}});
            }
            if (!csv()) emit(json{{"form", "stirling"}, {"entries", rows}});
            return exit_ok;
        });
        st->add_option("--k", k_, "k")->required()->check(CLI::Range(0u, stirling_max));
        st->add_option("--m", m_, "m (all 0..k when omitted)");
    }

    // ---- oracle ------------------------------------------------------------------

    void add_oracle(CLI::App& app) {
        auto* s = app.add_subcommand("oracle", "Ground truth from probability mass and density functions");
        s->require_subcommand(1);

        auto* e = sub(*s, "enumerate", "Exact raw moments by summation or quadrature", [this] {
            const std::string name = family_.require_name();
            const auto params = family_.param_map();
            const oracle::MomentMap m = oracle::exact_moments(name, params, order_);
            if (csv()) {
                out_ << "k,value\n";
                for (const auto& [k, v] : m) out_ << index_cell(k) << "," << csv_number(v) << "\n";
                return exit_ok;
            }
            json entries = json::array();
            for (const auto& [k, v] : m) entries.push_back(json{{"k", index_json(k)}, {"value", number(v)}});
            emit(json{{"family", name}, {"params", params}, {"order", order_}, {"entries", entries}});
            return exit_ok;
        });
        family_.add(e, false);
        e->add_option("--order", order_, "Highest order K")->check(CLI::Range(1u, 16u));

        auto* smp = sub(*s, "sample", "Seeded Monte Carlo draws", [this] {
            const std::string name = family_.require_name();
            const auto params = family_.param_map();
            const std::uint64_t seed = seed_ ? *seed_ : seed_from_env();
            const oracle::SampleSet draws = oracle::mc_sample(name, params, count_, seed);
            if (csv()) {
                for (std::size_t i = 0; i < draws.dim; ++i) out_ << (i ? "," : "") << "xi" << i + 1;
                out_ << "\n";
                for (std::size_t r = 0; r < draws.size(); ++r) {
                    for (std::size_t i = 0; i < draws.dim; ++i) out_ << (i ? "," : "") << csv_number(draws(r, i));
                    out_ << "\n";
                }
                return exit_ok;
            }
            json rows = json::array();
            Vector mean(draws.dim, 0.0);
            for (std::size_t r = 0; r < draws.size(); ++r) {
                json row = json::array();
                for (std::size_t i = 0; i < draws.dim; ++i) {
                    row.push_back(draws(r, i));
                    mean[i] += draws(r, i) / double(draws.size());
                }
                rows.push_back(row);
            }
            emit(json{{"family", name}, {"params", params}, {"seed", seed}, {"count", draws.size()},
                      {"cap_hits", draws.cap_hits}, {"dim", draws.dim}, {"mean", vector_json(mean)}, {"draws", rows}});
            return exit_ok;
        });
        family_.add(smp, false);
        smp->add_option("--count", count_, "Number of draws")->check(CLI::PositiveNumber);
        smp->add_option("--seed", seed_, "Seed (default: CLASSB_SEED or the library default)");

        auto* t = sub(*s, "tail", "Exact tail probability P(xi >= y)", [this] {
            const std::string name = family_.require_name();
            const auto params = family_.param_map();
            const double y = parse_double(y_text_);
            const double p = oracle::exact_tail(name, params, y);
            if (csv()) {
                out_ << "y,tail\n" << csv_number(y) << "," << csv_number(p) << "\n";
            } else {
                emit(json{{"family", name}, {"params", params}, {"y", y}, {"tail", number(p)}});
            }
            return exit_ok;
        });
        family_.add(t, false);
        t->add_option("--y", y_text_, "Threshold y")->required();
    }

    // ---- selftest ----------------------------------------------------------------

    void add_selftest(CLI::App& app) {
        auto* s = sub(app, "selftest", "Run the acceptance criteria", [this] {
            acceptance::Options opt;
            opt.seed = seed_from_env();
            if (mc_samples_) opt.mc_samples = *mc_samples_;
            std::vector<acceptance::CriterionResult> results;
            for (int id = 1; id <= static_cast<int>(acceptance::criterion_count()); ++id) {
                if (!only_.empty() && std::find(only_.begin(), only_.end(), id) == only_.end()) continue;
                results.push_back(acceptance::run_criterion(id, opt));
                err_ << acceptance::format_line(results.back()) << std::endl;
            }
            std::size_t passed = 0;
            for (const auto& r : results) passed += r.pass ? 1 : 0;
            if (csv()) {
                out_ << "id,name,pass,seconds,budget,detail\n";
                for (const auto& r : results)
                    out_ << r.id << "," << csv_escape(r.name) << "," << (r.pass ? "true" : "false") << ","
                         << csv_number(r.seconds) << "," << csv_number(r.budget) << "," << csv_escape(r.detail) << "\n";
            } else {
                json list = json::array();
                for (const auto& r : results)
                    list.push_back(json{{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"seconds", number(r.seconds)},
                                        {"budget", r.budget}, {"detail", r.detail}});
                emit(json{{"criteria", list}, {"passed", passed}, {"total", results.size()},
                          {"pass", passed == results.size()}});
            }
            return passed == results.size() ? exit_ok : exit_failure;
        });
        s->add_option("--only", only_, "Criterion ids to run")->delimiter(',');
        s->add_option("--mc-samples", mc_samples_, "Monte Carlo sample count")->check(CLI::PositiveNumber);
    }

    std::ostream& out_;
    std::ostream& err_;
    std::function<int()> action_;
    std::string format_ = "json";

    FamilyOptions family_;
    std::string kind_text_;
    unsigned order_ = 6;
    bool symbolic_ = false;
    bool describe_ = false;
    bool verify_ = false;
    std::vector<std::string> at_;
    std::size_t points_ = 5;
    double tol_ = 1e-8;
    double z_lo_ = -0.5;
    double z_hi_ = 0.5;
    std::vector<std::string> affine_;
    std::optional<std::int64_t> convolve_;
    std::optional<std::int64_t> mean_;
    std::string x_text_;
    std::string y_text_;
    std::string grid_text_;
    double a_ = 0.0;
    double b_ = 0.0;
    double x_ = 0.0;
    unsigned n_ = 1;
    double p_ = 0.75;
    unsigned k_ = 0;
    std::optional<unsigned> m_;
    std::size_t count_ = 1000;
    std::optional<std::uint64_t> seed_;
    std::vector<int> only_;
    std::optional<std::size_t> mc_samples_;
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return Runner(out, err).run(argc, argv);
}

}  // namespace classb::cli
