#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vrgym/bridge/envelope.hpp"
#include "vrgym/datalog.hpp"
#include "vrgym/envs.hpp"
#include "vrgym/intent.hpp"
#include "vrgym/irl.hpp"
#include "vrgym/rl.hpp"
#include "vrgym/scene.hpp"
#include "vrgym/social.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace vrgym;

namespace {

// JSON crosses the boundary as Python objects via the json module.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict posterior_dict(const intent::GoalPosterior& p) {
  py::dict d;
  for (std::size_t i = 0; i < p.ids.size(); ++i) d[py::str(p.ids[i])] = p.prob[i];
  return d;
}

intent::GoalSet goal_set(const std::map<std::string, std::pair<double, double>>& goals) {
  intent::GoalSet out;
  for (const auto& [id, xy] : goals) out.push_back({id, {xy.first, xy.second}, {0, 0}});
  return out;
}

OccupancyGrid grid_from_rows(const std::vector<std::string>& rows) {
  if (rows.empty()) throw std::invalid_argument("grid needs at least one row");
  OccupancyGrid g;
  g.height = static_cast<int>(rows.size());
  g.width = static_cast<int>(rows[0].size());
  g.cells.assign(static_cast<std::size_t>(g.width) * g.height, Cell::free);
  for (int r = 0; r < g.height; ++r) {
    if (static_cast<int>(rows[r].size()) != g.width) throw std::invalid_argument("ragged grid rows");
    // Rows are given north first; row 0 of the grid is the south edge.
    for (int c = 0; c < g.width; ++c)
      if (rows[g.height - 1 - r][c] == '#') g.cells[g.index(c, r)] = Cell::blocked;
  }
  return g;
}

py::dict report_dict(const rl::TrainReport& r) {
  py::dict d;
  d["returns"] = r.returns;
  d["success"] = std::vector<int>(r.success.begin(), r.success.end());
  d["steps"] = r.steps;
  d["success_rate_last100"] = r.success_rate_last(100);
  return d;
}

}  // namespace

PYBIND11_MODULE(_vrgym, m) {
  m.doc() = "Bindings for the vrgym simulator, bridge codec and learners.";

  py::register_exception<SceneError>(m, "SceneError", PyExc_ValueError);
  py::register_exception<bridge::FrameError>(m, "FrameError", PyExc_ValueError);
  py::register_exception<envs::EnvError>(m, "EnvError", PyExc_ValueError);
  py::register_exception<intent::IntentError>(m, "IntentError", PyExc_ValueError);
  py::register_exception<datalog::LogError>(m, "LogError", PyExc_ValueError);

  // bridge codec
  m.def("crc32", [](py::bytes b) { return bridge::crc32(std::string(b)); });
  m.def("canonical_dump", [](py::object v) { return bridge::canonical_dump(from_py(v)); });
  m.def("topic_matches", &bridge::topic_matches, py::arg("pattern"), py::arg("topic"));
  m.def(
      "encode_frame",
      [](const std::string& topic, std::uint64_t seq, std::uint64_t stamp_ns, const std::string& type, py::object data) {
        return py::bytes(bridge::encode_frame(bridge::make_envelope(topic, seq, stamp_ns, type, from_py(data))));
      },
      py::arg("topic"), py::arg("seq"), py::arg("stamp_ns"), py::arg("type"), py::arg("data"));
  m.def("decode_frame", [](py::bytes frame) {
    auto e = bridge::decode_frame(std::string(frame));
    return to_py({{"topic", e.topic}, {"seq", e.seq}, {"stamp_ns", e.stamp_ns}, {"type", e.type},
                  {"crc32", e.crc32}, {"data", e.data}});
  });

  // scene
  py::class_<SceneGraph>(m, "Scene")
      .def_property_readonly("tick", [](const SceneGraph& s) { return s.tick; })
      .def("agent_ids", &SceneGraph::agent_ids)
      .def("pose",
           [](const SceneGraph& s, const std::string& id) {
             const Pose& p = s.at(id).pose;
             return py::make_tuple(p.x, p.y, p.yaw);
           })
      .def(
          "step",
          [](SceneGraph& s, const std::vector<std::tuple<std::string, double, double>>& commands) {
            std::vector<VelocityCommand> cmds;
            for (const auto& [id, v, w] : commands) cmds.push_back({id, v, w});
            std::vector<py::object> out;
            for (const auto& ev : advance(s, cmds)) out.push_back(to_py(to_json(ev)));
            return out;
          },
          py::arg("commands") = std::vector<std::tuple<std::string, double, double>>{})
      .def("to_dict", [](const SceneGraph& s) { return to_py(to_json(s)); });
  m.def("load_scene", [](const std::string& doc) { return load_scene(doc); }, py::arg("document"));
  m.def("scene_hash", [](const std::string& doc) { return datalog::scene_hash(doc); });

  // environments
  py::class_<envs::Environment, std::unique_ptr<envs::Environment>>(m, "Env")
      .def("reset", &envs::Environment::reset, py::arg("seed") = 0)
      .def("step",
           [](envs::Environment& e, py::object action) {
             envs::StepResult r = py::isinstance<py::int_>(action) ? e.step(action.cast<int>())
                                                                   : e.step(action.cast<std::vector<double>>());
             py::dict info;
             info["collision"] = r.info.collision;
             info["zone"] = r.info.zone;
             info["success"] = r.info.success;
             return py::make_tuple(r.observation, r.reward, r.done, info);
           })
      .def_property_readonly("obs_dim", &envs::Environment::obs_dim)
      .def_property_readonly("n_actions", [](const envs::Environment& e) { return e.action_space().n; })
      .def_property_readonly("step_limit", &envs::Environment::step_limit);
  m.def(
      "make_env", [](py::object config, const std::string& base_dir) { return envs::make_env(from_py(config), base_dir); },
      py::arg("config"), py::arg("base_dir") = "");

  // learners
  m.def(
      "train",
      [](const std::string& algo, envs::Environment& env, py::object config) {
        rl::TrainConfig c = config.is_none() ? rl::TrainConfig{} : rl::train_config_from_json(from_py(config));
        py::gil_scoped_release release;
        rl::TrainReport r;
        if (algo == "q") {
          rl::EnvTask task(env);
          r = rl::q_learning_train(task, c).report;
        } else if (algo == "dqn") {
          r = rl::dqn_train(env, c).report;
        } else if (algo == "dueling") {
          r = rl::dueling_dqn_train(env, c).report;
        } else if (algo == "ac") {
          r = rl::actor_critic_train(env, c).report;
        } else if (algo == "ddpg") {
          r = rl::ddpg_train(env, c).report;
        } else {
          throw std::invalid_argument("unknown algorithm '" + algo + "'");
        }
        py::gil_scoped_acquire acquire;
        return report_dict(r);
      },
      py::arg("algo"), py::arg("env"), py::arg("config") = py::none());
  m.def("gradient_checks", [](std::uint64_t seed) {
    py::dict d;
    for (const auto& g : rl::gradient_checks(seed)) d[py::str(g.name)] = g.max_rel_error;
    return d;
  });

  m.def(
      "gridworld_mdp", [](int w, int h, double gamma) { return to_py(to_json(gridworld_mdp(w, h, false, gamma))); },
      py::arg("width"), py::arg("height"), py::arg("gamma") = 0.9);
  m.def(
      "value_iteration",
      [](py::object mdp, const std::vector<double>& reward) {
        auto v = irl::value_iteration(grid_mdp_from_json(from_py(mdp)), reward);
        return py::make_tuple(v.value, v.policy);
      },
      py::arg("mdp"), py::arg("reward"));
  m.def(
      "maxent_irl",
      [](py::object mdp, const std::vector<std::vector<std::pair<int, int>>>& trajectories, int iterations) {
        irl::Demos demos;
        for (const auto& t : trajectories) demos.push_back({t});
        irl::MaxEntConfig c;
        c.iterations = iterations;
        GridMDP g = grid_mdp_from_json(from_py(mdp));
        auto r = irl::maxent_irl(g, demos, c);
        return py::make_tuple(r.reward.state_reward(g), r.diagnostics.converged);
      },
      py::arg("mdp"), py::arg("demos"), py::arg("iterations") = 200);

  // intent
  m.def(
      "predict_straightline",
      [](std::pair<double, double> pos, const std::map<std::string, std::pair<double, double>>& goals, double beta) {
        return posterior_dict(intent::predict_straightline({pos.first, pos.second}, goal_set(goals), beta));
      },
      py::arg("pos"), py::arg("goals"), py::arg("beta") = 2.0);
  m.def(
      "predict_perpendicular",
      [](std::pair<double, double> pos, std::pair<double, double> heading,
         const std::map<std::string, std::pair<double, double>>& goals, double beta) {
        return posterior_dict(intent::predict_perpendicular({pos.first, pos.second}, {heading.first, heading.second},
                                                            goal_set(goals), beta));
      },
      py::arg("pos"), py::arg("heading"), py::arg("goals"), py::arg("beta") = 2.0);
  m.def(
      "a_star",
      [](const std::vector<std::string>& rows, intent::GridCell from, intent::GridCell to) {
        auto r = intent::a_star(grid_from_rows(rows), from, to);
        return py::make_tuple(r.cost, r.path);
      },
      py::arg("rows"), py::arg("start"), py::arg("goal"));

  // datalog
  m.def(
      "replay_divergences",
      [](const std::string& session_jsonl, const std::string& scene_doc) {
        auto r = datalog::replay(datalog::SessionLog::from_jsonl(session_jsonl), scene_doc);
        return r.divergences.size();
      },
      py::arg("session"), py::arg("scene"));

  // social
  m.def("respond", [](const std::string& kind, const std::string& agent) {
    social::SocialSignal s{agent, social::signal_kind_from_string(kind), 0};
    return to_py(social::response_for(s).to_json());
  });
}
