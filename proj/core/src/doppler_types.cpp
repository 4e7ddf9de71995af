#include "dopplerkit/doppler_types.hpp"

#include "dopplerkit/errors.hpp"

namespace dopplerkit {

const std::vector<FlowType>& all_flow_types() {
    static const std::vector<FlowType> types = {
        FlowType::AV_INFLOW,  FlowType::AV_REGURG, FlowType::VAR_EJECTION, FlowType::VAR_REGURG,
        FlowType::TDI_ANNULUS, FlowType::VENOUS_PW, FlowType::OUTFLOW_PW,
    };
    return types;
}

std::string flow_type_name(FlowType type) {
    switch (type) {
        case FlowType::AV_INFLOW: return "AV_INFLOW";
        case FlowType::AV_REGURG: return "AV_REGURG";
        case FlowType::VAR_EJECTION: return "VAR_EJECTION";
        case FlowType::VAR_REGURG: return "VAR_REGURG";
        case FlowType::TDI_ANNULUS: return "TDI_ANNULUS";
        case FlowType::VENOUS_PW: return "VENOUS_PW";
        case FlowType::OUTFLOW_PW: return "OUTFLOW_PW";
    }
    throw DataError("unknown flow type value");
}

FlowType flow_type_from_name(const std::string& name) {
    for (FlowType t : all_flow_types())
        if (flow_type_name(t) == name) return t;
    throw DataError("unknown flow type name: " + name);
}

std::string direction_name(FlowDirection dir) {
    return dir == FlowDirection::forward ? "forward" : "reverse";
}

FlowDirection direction_from_name(const std::string& name) {
    if (name == "forward") return FlowDirection::forward;
    if (name == "reverse") return FlowDirection::reverse;
    throw DataError("unknown flow direction: " + name);
}

SegMask make_mask(int rows, int cols) {
    SegMask m;
    m.rows = rows;
    m.cols = cols;
    m.labels.assign(static_cast<std::size_t>(rows) * cols, kClassBackground);
    return m;
}

EdRule ed_rule_for(FlowType type) {
    switch (type) {
        case FlowType::AV_INFLOW:
        case FlowType::TDI_ANNULUS:
        case FlowType::VENOUS_PW: return EdRule::forward_end;
        case FlowType::VAR_EJECTION:
        case FlowType::OUTFLOW_PW: return EdRule::forward_start;
        case FlowType::AV_REGURG: return EdRule::reverse_start;
        case FlowType::VAR_REGURG: return EdRule::reverse_end;
    }
    throw DataError("unknown flow type value");
}

}  // namespace dopplerkit
