#include "greit/accounting.hpp"

#include <map>
#include <sstream>

#include "json.hpp"

namespace greit {

namespace {

// Module row a parameter belongs to: "stageS.blockB.layerL" / ".fuse" for
// stage internals, otherwise the leading component (stem, transitionN, head).
std::string scope_of(const std::string& param_name) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= param_name.size()) {
        const auto dot = param_name.find('.', pos);
        if (dot == std::string::npos) {
            parts.push_back(param_name.substr(pos));
            break;
        }
        parts.push_back(param_name.substr(pos, dot - pos));
        pos = dot + 1;
    }
    if (parts[0].rfind("stage", 0) == 0 && parts.size() >= 3) {
        return parts[0] + "." + parts[1] + "." + parts[2];
    }
    return parts[0];
}

void gather_params(const Network& net, std::map<std::string, std::int64_t>& by_scope,
                   std::vector<std::string>& order, std::int64_t& total) {
    net.visit_params([&](const std::string& name, const Tensor<float>& t, bool learned) {
        if (!learned) return;
        auto [it, fresh] = by_scope.try_emplace(scope_of(name), 0);
        if (fresh) order.push_back(it->first);
        it->second += t.size();
        total += t.size();
    });
}

}  // namespace

CostReport count_params(const Network& net) {
    CostReport rep;
    std::map<std::string, std::int64_t> by_scope;
    std::vector<std::string> order;
    gather_params(net, by_scope, order, rep.total_params);
    for (const auto& name : order) rep.rows.push_back({name, by_scope[name], 0});
    return rep;
}

CostReport count_flops(const Network& net, int input_h, int input_w) {
    CostReport rep;
    rep.input_h = input_h;
    rep.input_w = input_w;

    CostSink sink;
    net.forward_cost(1, input_h, input_w, sink);
    rep.total_flops = sink.total;

    std::map<std::string, std::int64_t> params;
    std::vector<std::string> param_order;
    gather_params(net, params, param_order, rep.total_params);

    for (const auto& scope : sink.order) {
        CostRow row{scope, 0, sink.by_scope.at(scope)};
        auto it = params.find(scope);
        if (it != params.end()) row.params = it->second;
        rep.rows.push_back(row);
    }
    return rep;
}

std::vector<GrowthRow> channel_growth_report(const std::string& method, const ArchConfig& cfg) {
    if (method != "ccw" && method != "gcw") {
        throw ValueError("channel_growth_report: method must be 'ccw' or 'gcw', got '" + method + "'");
    }
    cfg.validate();
    std::vector<GrowthRow> rows;
    for (int stage = 2; stage <= 4; ++stage) {
        const int n = stage;  // stage s runs s branches
        int channels = 0;
        if (method == "ccw") {
            for (int i = 0; i < n; ++i) channels += cfg.widths[static_cast<std::size_t>(i)];
        } else {
            const auto ga = GroupAssignment::two_groups(n);
            int high = 0, low = 0;
            for (int i : ga.high) high += cfg.widths[static_cast<std::size_t>(i)];
            for (int i : ga.low) low += cfg.widths[static_cast<std::size_t>(i)];
            channels = std::max(high, low);
        }
        rows.push_back({stage, method, channels});
    }
    return rows;
}

std::string CostReport::to_text(bool per_layer) const {
    std::ostringstream os;
    const auto fmt_row = [&](const std::string& name, std::int64_t p, std::int64_t f) {
        os << name;
        for (std::size_t i = name.size(); i < 28; ++i) os << ' ';
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%12lld", static_cast<long long>(p));
        os << buf;
        if (input_h > 0) {
            std::snprintf(buf, sizeof(buf), "%16lld", static_cast<long long>(f));
            os << buf;
        }
        os << '\n';
    };
    os << "module                            params";
    if (input_h > 0) os << "           flops";
    os << '\n';
    if (per_layer) {
        for (const auto& row : rows) fmt_row(row.name, row.params, row.flops);
    }
    fmt_row("total", total_params, total_flops);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "params: %.4f M\n", static_cast<double>(total_params) / 1e6);
    os << buf;
    if (input_h > 0) {
        std::snprintf(buf, sizeof(buf), "flops @%dx%d: %.4f GMACs\n", input_h, input_w,
                      static_cast<double>(total_flops) / 1e9);
        os << buf;
    }
    for (const auto& g : growth) {
        os << "stage" << g.stage << ' ' << g.method << " channels " << g.channels << '\n';
    }
    return os.str();
}

std::string CostReport::to_json(bool per_layer) const {
    nlohmann::json j;
    j["total_params"] = total_params;
    j["total_flops"] = total_flops;
    if (input_h > 0) {
        j["input"] = {{"height", input_h}, {"width", input_w}};
    }
    if (per_layer) {
        j["rows"] = nlohmann::json::array();
        for (const auto& row : rows) {
            j["rows"].push_back({{"name", row.name}, {"params", row.params}, {"flops", row.flops}});
        }
    }
    if (!growth.empty()) {
        j["growth"] = nlohmann::json::array();
        for (const auto& g : growth) {
            j["growth"].push_back({{"stage", g.stage}, {"method", g.method}, {"channels", g.channels}});
        }
    }
    return j.dump(2) + "\n";
}

}  // namespace greit
