#include "stemmed/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace stemmed {

using nlohmann::json;

namespace {

constexpr const char* kEventsHeader = "#stemmed-events v1";
constexpr const char* kCovariatesHeader = "#stemmed-covariates v1";
constexpr const char* kDistancesHeader = "#stemmed-distances v1";

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    return in;
}

[[noreturn]] void bad_line(const std::string& path, int line_no, const std::string& why) {
    throw IoError(path + ":" + std::to_string(line_no) + ": " + why);
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream stream(text);
    while (std::getline(stream, item, sep)) out.push_back(item);
    if (!text.empty() && text.back() == sep) out.push_back("");
    return out;
}

double parse_double(const std::string& text, const std::string& path, int line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) bad_line(path, line_no, "bad number '" + text + "'");
        return v;
    } catch (const std::exception&) {
        bad_line(path, line_no, "bad number '" + text + "'");
    }
}

int label_index(const std::vector<std::string>& labels, const std::string& label,
                const std::string& path, int line_no, const char* kind) {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
        bad_line(path, line_no, std::string("unknown ") + kind + " '" + label + "'");
    }
    return static_cast<int>(std::distance(labels.begin(), it));
}

} // namespace

std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

void write_events_file(const std::string& path, const NetworkSpec& spec,
                       const EventDatabase& db) {
    auto out = open_out(path);
    out << kEventsHeader << "\n";
    for (const Event& e : db.global_events()) {
        out << format_double(e.time) << '\t'
            << spec.communities.at(static_cast<std::size_t>(e.node.community)) << '\t'
            << spec.drugs.at(static_cast<std::size_t>(e.node.drug)) << '\t';
        if (e.features.empty()) {
            out << '-';
        } else {
            for (std::size_t j = 0; j < e.features.size(); ++j) {
                if (j > 0) out << ',';
                out << format_double(e.features[j]);
            }
        }
        out << '\t';
        for (std::size_t j = 0; j < e.drugs_involved.size(); ++j) {
            if (j > 0) out << ';';
            out << spec.drugs.at(static_cast<std::size_t>(e.drugs_involved[j]));
        }
        out << '\n';
    }
}

EventDatabase read_events_file(const std::string& path, const NetworkSpec& spec) {
    auto in = open_in(path);
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line) || line != kEventsHeader) {
        bad_line(path, 1, std::string("expected header '") + kEventsHeader + "'");
    }
    line_no = 1;
    EventDatabase db(spec);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() != 5) bad_line(path, line_no, "expected 5 tab-separated columns");
        Event e;
        e.time = parse_double(cols[0], path, line_no);
        e.node.community = label_index(spec.communities, cols[1], path, line_no, "community");
        e.node.drug = label_index(spec.drugs, cols[2], path, line_no, "drug");
        if (cols[3] != "-") {
            for (const auto& f : split(cols[3], ',')) {
                e.features.push_back(parse_double(f, path, line_no));
            }
        }
        for (const auto& d : split(cols[4], ';')) {
            e.drugs_involved.push_back(label_index(spec.drugs, d, path, line_no, "drug"));
        }
        try {
            db.add(std::move(e));
        } catch (const InvalidInputError& err) {
            bad_line(path, line_no, err.what());
        }
    }
    return db;
}

void write_covariates_file(const std::string& path, const NetworkSpec& spec,
                           const CovariateTracks& tracks) {
    auto out = open_out(path);
    out << kCovariatesHeader << "\n";
    for (int ui = 0; ui < spec.n_nodes(); ++ui) {
        const CovariateTrack* track = tracks.track_for(ui);
        if (track == nullptr) continue;
        const NodeId u = spec.node_at(ui);
        for (std::size_t k = 0; k < track->breakpoints.size(); ++k) {
            out << spec.communities.at(static_cast<std::size_t>(u.community)) << '\t'
                << spec.drugs.at(static_cast<std::size_t>(u.drug)) << '\t'
                << format_double(track->breakpoints[k]) << '\t';
            const auto& value = track->values[k];
            for (std::size_t j = 0; j < value.size(); ++j) {
                if (j > 0) out << ',';
                out << format_double(value[j]);
            }
            out << '\n';
        }
    }
}

CovariateTracks read_covariates_file(const std::string& path, const NetworkSpec& spec) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line != kCovariatesHeader) {
        bad_line(path, 1, std::string("expected header '") + kCovariatesHeader + "'");
    }
    int line_no = 1;
    CovariateTracks tracks;
    tracks.tracks.resize(static_cast<std::size_t>(spec.n_nodes()));
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() != 4) bad_line(path, line_no, "expected 4 tab-separated columns");
        NodeId u;
        u.community = label_index(spec.communities, cols[0], path, line_no, "community");
        u.drug = label_index(spec.drugs, cols[1], path, line_no, "drug");
        const double t = parse_double(cols[2], path, line_no);
        std::vector<double> value;
        for (const auto& v : split(cols[3], ',')) {
            value.push_back(parse_double(v, path, line_no));
        }
        auto& track = tracks.tracks.at(static_cast<std::size_t>(spec.node_index(u)));
        if (!track.breakpoints.empty() && t <= track.breakpoints.back()) {
            bad_line(path, line_no, "breakpoints must be strictly increasing per node");
        }
        track.breakpoints.push_back(t);
        track.values.push_back(std::move(value));
    }
    for (const auto& track : tracks.tracks) track.validate();
    return tracks;
}

void write_distances_file(const std::string& path, const NetworkSpec& spec) {
    auto out = open_out(path);
    out << kDistancesHeader << "\n.";
    for (const auto& c : spec.communities) out << '\t' << c;
    out << '\n';
    for (std::size_t i = 0; i < spec.communities.size(); ++i) {
        out << spec.communities[i];
        for (std::size_t j = 0; j < spec.communities.size(); ++j) {
            out << '\t' << format_double(spec.distances[i][j]);
        }
        out << '\n';
    }
}

void read_distances_file(const std::string& path, std::vector<std::string>& communities,
                         std::vector<std::vector<double>>& distances) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line != kDistancesHeader) {
        bad_line(path, 1, std::string("expected header '") + kDistancesHeader + "'");
    }
    if (!std::getline(in, line)) bad_line(path, 2, "missing label row");
    auto labels = split(line, '\t');
    if (labels.empty() || labels[0] != ".") bad_line(path, 2, "label row must start with '.'");
    labels.erase(labels.begin());
    communities = labels;
    distances.assign(labels.size(), std::vector<double>(labels.size(), 0.0));
    int line_no = 2;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!std::getline(in, line)) bad_line(path, line_no + 1, "missing matrix row");
        ++line_no;
        const auto cols = split(line, '\t');
        if (cols.size() != labels.size() + 1 || cols[0] != labels[i]) {
            bad_line(path, line_no, "matrix row does not match the label row");
        }
        for (std::size_t j = 0; j < labels.size(); ++j) {
            distances[i][j] = parse_double(cols[j + 1], path, line_no);
        }
    }
}

namespace {

json params_to_json(const NodeParams& p) {
    return json{{"gamma", p.gamma},   {"beta", p.beta},   {"alpha", p.alpha},
                {"delta_g", p.delta_g}, {"omega", p.omega}, {"delta_k", p.delta_k}};
}

NodeParams params_from_json(const json& j) {
    NodeParams p;
    p.gamma = j.at("gamma").get<double>();
    p.beta = j.at("beta").get<std::vector<double>>();
    p.alpha = j.at("alpha").get<double>();
    p.delta_g = j.at("delta_g").get<double>();
    p.omega = j.at("omega").get<std::vector<double>>();
    p.delta_k = j.at("delta_k").get<double>();
    return p;
}

} // namespace

void write_params_json(const std::string& path, const NetworkSpec& spec,
                       const NetworkParams& params) {
    json nodes = json::object();
    for (int ui = 0; ui < spec.n_nodes(); ++ui) {
        nodes[spec.node_label(spec.node_at(ui))] =
            params_to_json(params.nodes.at(static_cast<std::size_t>(ui)));
    }
    const json doc{{"schema", "stemmed-params v1"}, {"nodes", nodes}};
    auto out = open_out(path);
    out << doc.dump(2) << "\n";
}

NetworkParams read_params_json(const std::string& path, const NetworkSpec& spec) {
    auto in = open_in(path);
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& err) {
        throw IoError(path + ": " + err.what());
    }
    if (doc.value("schema", "") != "stemmed-params v1") {
        throw IoError(path + ": expected schema 'stemmed-params v1'");
    }
    NetworkParams params;
    params.nodes.resize(static_cast<std::size_t>(spec.n_nodes()));
    for (int ui = 0; ui < spec.n_nodes(); ++ui) {
        const std::string label = spec.node_label(spec.node_at(ui));
        if (!doc.at("nodes").contains(label)) {
            throw IoError(path + ": missing parameters for node " + label);
        }
        params.nodes[static_cast<std::size_t>(ui)] = params_from_json(doc.at("nodes").at(label));
    }
    return params;
}

void write_scenario_json(const std::string& path, const Scenario& scenario) {
    json tracks = json::array();
    for (const auto& track : scenario.tracks.tracks) {
        tracks.push_back(json{{"breakpoints", track.breakpoints}, {"values", track.values}});
    }
    json nodes = json::array();
    for (const auto& p : scenario.params.nodes) nodes.push_back(params_to_json(p));
    const json doc{{"schema", "stemmed-scenario v1"},
                   {"communities", scenario.spec.communities},
                   {"drugs", scenario.spec.drugs},
                   {"distances", scenario.spec.distances},
                   {"tracks", tracks},
                   {"params", nodes},
                   {"mark_features", scenario.marks.n_features},
                   {"co_drug_prob", scenario.marks.co_drug_prob},
                   {"horizon", scenario.horizon},
                   {"seed", scenario.seed}};
    auto out = open_out(path);
    out << doc.dump(2) << "\n";
}

Scenario read_scenario_json(const std::string& path) {
    auto in = open_in(path);
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& err) {
        throw IoError(path + ": " + err.what());
    }
    if (doc.value("schema", "") != "stemmed-scenario v1") {
        throw IoError(path + ": expected schema 'stemmed-scenario v1'");
    }
    Scenario scenario;
    scenario.spec.communities = doc.at("communities").get<std::vector<std::string>>();
    scenario.spec.drugs = doc.at("drugs").get<std::vector<std::string>>();
    scenario.spec.distances = doc.at("distances").get<std::vector<std::vector<double>>>();
    for (const auto& jt : doc.at("tracks")) {
        CovariateTrack track;
        track.breakpoints = jt.at("breakpoints").get<std::vector<double>>();
        track.values = jt.at("values").get<std::vector<std::vector<double>>>();
        scenario.tracks.tracks.push_back(std::move(track));
    }
    for (const auto& jp : doc.at("params")) {
        scenario.params.nodes.push_back(params_from_json(jp));
    }
    scenario.marks.n_features = doc.at("mark_features").get<int>();
    scenario.marks.co_drug_prob = doc.at("co_drug_prob").get<double>();
    scenario.horizon = doc.at("horizon").get<double>();
    scenario.seed = doc.at("seed").get<uint64_t>();
    scenario.validate();
    return scenario;
}

void write_forecast_csv(const std::string& path, const NetworkSpec& spec,
                        const ForecastResult& forecast) {
    auto out = open_out(path);
    out << "node,bin_start,bin_end,expected";
    for (std::size_t path_i = 0; path_i < forecast.sampled.size(); ++path_i) {
        out << ",path" << path_i;
    }
    out << "\n";
    for (std::size_t k = 0; k < forecast.bin_start.size(); ++k) {
        for (int ui = 0; ui < spec.n_nodes(); ++ui) {
            out << spec.node_label(spec.node_at(ui)) << ','
                << format_double(forecast.bin_start[k]) << ','
                << format_double(forecast.bin_start[k] + forecast.bin_width) << ','
                << format_double(forecast.expected[k][static_cast<std::size_t>(ui)]);
            for (const auto& path_counts : forecast.sampled) {
                out << ',' << path_counts[k][static_cast<std::size_t>(ui)];
            }
            out << "\n";
        }
    }
}

void write_recovery_csv(const std::string& path, const RecoveryReport& report) {
    auto out = open_out(path);
    out << "n_nodes,cutoff,parameter,mean,p2.5,p97.5,replications,failures\n";
    for (const auto& cell : report.cells) {
        for (std::size_t k = 0; k < cell.param_names.size(); ++k) {
            out << cell.n_nodes << ',' << format_double(cell.cutoff) << ','
                << cell.param_names[k] << ',' << format_double(cell.mean[k]) << ','
                << format_double(cell.p2_5[k]) << ',' << format_double(cell.p97_5[k]) << ','
                << cell.estimates.size() << ',' << cell.n_failed << "\n";
        }
    }
}

void write_eval_log_csv(const std::string& path, const NetworkSpec& spec,
                        const std::vector<EvalRecord>& log) {
    auto out = open_out(path);
    out << "variant,node,issue_time,horizon,predicted,realized\n";
    for (const EvalRecord& r : log) {
        out << variant_name(r.variant) << ',' << spec.node_label(spec.node_at(r.node)) << ','
            << format_double(r.issue_time) << ',' << r.horizon << ','
            << format_double(r.predicted) << ',' << format_double(r.realized) << "\n";
    }
}

void write_mspe_csv(const std::string& path, const std::vector<MspeRow>& rows) {
    auto out = open_out(path);
    out << "variant,horizon,group,mspe,n\n";
    for (const MspeRow& r : rows) {
        out << r.variant << ',' << r.horizon << ',' << r.group << ','
            << format_double(r.mspe) << ',' << r.n << "\n";
    }
}

void write_arcs_csv(const std::string& path, const NetworkSpec& spec,
                    const NetworkParams& params, const EventDatabase& db,
                    const std::vector<double>& times) {
    auto out = open_out(path);
    out << "time,target,source,weight\n";
    for (double t : times) {
        const Snapshot snap = db.snapshot_before(t);
        for (int ui = 0; ui < spec.n_nodes(); ++ui) {
            const NodeId u = spec.node_at(ui);
            for (int vi = 0; vi < spec.n_nodes(); ++vi) {
                const NodeId v = spec.node_at(vi);
                const double w = arc_weight(params.nodes.at(static_cast<std::size_t>(ui)), u,
                                            v, t, spec, snap);
                out << format_double(t) << ',' << spec.node_label(u) << ','
                    << spec.node_label(v) << ',' << format_double(w) << "\n";
            }
        }
    }
}

void write_trace_csv(const std::string& path, const NetworkSpec& spec,
                     const std::vector<FitResult>& fits) {
    auto out = open_out(path);
    out << "node,iteration,loglik\n";
    for (std::size_t i = 0; i < fits.size(); ++i) {
        for (const auto& [iter, value] : fits[i].trace) {
            out << spec.node_label(spec.node_at(static_cast<int>(i))) << ',' << iter << ','
                << format_double(value) << "\n";
        }
    }
}

} // namespace stemmed
