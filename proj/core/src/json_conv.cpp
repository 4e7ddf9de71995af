#include "dopplerkit/json_conv.hpp"

namespace dopplerkit {

void to_json(nlohmann::json& j, const NetworkConfig& c) {
    j = nlohmann::json{{"depth", c.depth},
                       {"base_channels", c.base_channels},
                       {"num_seg_classes", c.num_seg_classes},
                       {"num_flow_types", c.num_flow_types},
                       {"anti_alias", c.anti_alias},
                       {"shape_embed", c.shape_embed},
                       {"blur_k", c.blur_k},
                       {"mu", c.mu},
                       {"input_rows", c.input_rows},
                       {"input_cols", c.input_cols},
                       {"fusion", c.fusion}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
    j.at("depth").get_to(c.depth);
    j.at("base_channels").get_to(c.base_channels);
    j.at("num_seg_classes").get_to(c.num_seg_classes);
    j.at("num_flow_types").get_to(c.num_flow_types);
    j.at("anti_alias").get_to(c.anti_alias);
    j.at("shape_embed").get_to(c.shape_embed);
    j.at("blur_k").get_to(c.blur_k);
    j.at("mu").get_to(c.mu);
    j.at("input_rows").get_to(c.input_rows);
    j.at("input_cols").get_to(c.input_cols);
    j.at("fusion").get_to(c.fusion);
}

void to_json(nlohmann::json& j, const Calibration& c) {
    j = nlohmann::json{{"sec_per_col", c.sec_per_col},
                       {"cmps_per_row", c.cmps_per_row},
                       {"baseline_row", c.baseline_row}};
}

void from_json(const nlohmann::json& j, Calibration& c) {
    j.at("sec_per_col").get_to(c.sec_per_col);
    j.at("cmps_per_row").get_to(c.cmps_per_row);
    j.at("baseline_row").get_to(c.baseline_row);
}

void to_json(nlohmann::json& j, const Beat& b) {
    j = nlohmann::json{{"start_col", b.start_col},
                       {"end_col", b.end_col},
                       {"direction", direction_name(b.direction)}};
}

void from_json(const nlohmann::json& j, Beat& b) {
    j.at("start_col").get_to(b.start_col);
    j.at("end_col").get_to(b.end_col);
    b.direction = direction_from_name(j.at("direction").get<std::string>());
}

void to_json(nlohmann::json& j, const Measurement& m) {
    j = nlohmann::json{{"beat", m.beat}, {"vmax", m.vmax}, {"vti", m.vti}};
}

void from_json(const nlohmann::json& j, Measurement& m) {
    j.at("beat").get_to(m.beat);
    j.at("vmax").get_to(m.vmax);
    j.at("vti").get_to(m.vti);
}

void to_json(nlohmann::json& j, const SplitPlan& p) {
    nlohmann::json repeats = nlohmann::json::array();
    for (const SplitRepeat& r : p.repeats)
        repeats.push_back({{"train", r.train}, {"val", r.val}, {"test", r.test}});
    j = nlohmann::json{
        {"ratios", p.ratios}, {"n_repeats", p.n_repeats}, {"seed", p.seed}, {"repeats", repeats}};
}

void from_json(const nlohmann::json& j, SplitPlan& p) {
    j.at("ratios").get_to(p.ratios);
    j.at("n_repeats").get_to(p.n_repeats);
    j.at("seed").get_to(p.seed);
    p.repeats.clear();
    for (const auto& r : j.at("repeats")) {
        SplitRepeat rep;
        r.at("train").get_to(rep.train);
        r.at("val").get_to(rep.val);
        r.at("test").get_to(rep.test);
        p.repeats.push_back(std::move(rep));
    }
}

nlohmann::json sidecar_json(const SynthCase& c) {
    return nlohmann::json{{"calibration", c.calibration},
                          {"flow_type", flow_type_name(c.flow_type)},
                          {"seed", c.spec.seed},
                          {"heart_rate", c.spec.heart_rate},
                          {"n_beats", c.spec.n_beats},
                          {"peak_velocity", c.spec.peak_velocity},
                          {"noise_level", c.spec.noise_level},
                          {"rows", c.spec.rows},
                          {"cols", c.spec.cols},
                          {"gt_beats", c.gt_beats},
                          {"gt_measurements", c.gt_measurements},
                          {"gt_ed_times", c.gt_ed_times}};
}

void sidecar_from_json(const nlohmann::json& j, SynthCase& c) {
    j.at("calibration").get_to(c.calibration);
    c.flow_type = flow_type_from_name(j.at("flow_type").get<std::string>());
    j.at("seed").get_to(c.spec.seed);
    j.at("heart_rate").get_to(c.spec.heart_rate);
    j.at("n_beats").get_to(c.spec.n_beats);
    j.at("peak_velocity").get_to(c.spec.peak_velocity);
    j.at("noise_level").get_to(c.spec.noise_level);
    j.at("rows").get_to(c.spec.rows);
    j.at("cols").get_to(c.spec.cols);
    j.at("gt_beats").get_to(c.gt_beats);
    j.at("gt_measurements").get_to(c.gt_measurements);
    j.at("gt_ed_times").get_to(c.gt_ed_times);
    c.spec.flow_type = c.flow_type;
    c.spec.calibration = c.calibration;
}

}  // namespace dopplerkit
