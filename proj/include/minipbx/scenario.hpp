#ifndef MINIPBX_SCENARIO_HPP
#define MINIPBX_SCENARIO_HPP

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "minipbx/engine.hpp"
#include "minipbx/media.hpp"
#include "minipbx/net.hpp"
#include "minipbx/tunnel.hpp"
#include "minipbx/vtime.hpp"

namespace minipbx::scenario {

// Exit codes the runner and CLI share.
inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertFailed = 1;
inline constexpr int kExitConfigInvalid = 2;

struct Step {
    VTime at = 0;
    std::string verb;
    std::vector<std::string> args;
    int line = 0;
};

struct StudentSeed {
    std::string id;
    std::string password;
    int attendance = 0;
};

struct ClientDecl {
    std::string peer;
    std::optional<Ipv4> addr;
};

class ScenarioError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Line-oriented scenario: header lines (name, config paths, seeds, options,
// clients), then timed "AT <seconds> <verb> <args...>" steps.
struct Scenario {
    std::string name;
    std::string base_dir;
    std::map<std::string, std::string> config_paths;  // sip-conf, extensions-conf, ...
    std::map<std::string, std::string> options;
    std::vector<StudentSeed> students;
    std::vector<ClientDecl> clients;
    std::vector<Step> steps;

    static Scenario parse(const std::string& text, const std::string& base_dir);
    static Scenario load(const std::string& path);
};

// --- attack generation -------------------------------------------------------

struct AttackSpec {
    enum class Kind { RegisterFlood, PortScan, BruteForce };
    Kind kind = Kind::RegisterFlood;
    Ipv4 src;
    // register-flood
    int count = 0;
    VTime window = 0;
    std::string flood_user = "mallory";
    // port-scan
    int port_lo = 0, port_hi = 0;
    // brute-force; target is a peer name or box@context
    std::string target;
    int attempts = 0;
};

struct AttackStep {
    VTime offset = 0;
    enum class Type { RegisterNoAuth, RegisterWrongSecret, RawProbe, VmInvite, VmDigits, VmBye };
    Type type = Type::RegisterNoAuth;
    std::string user;      // register kinds
    std::uint16_t port = 0;  // raw probe
    std::string call_id;   // vm kinds
    std::string digits;    // vm digits
};

// Deterministic schedule: floods evenly spaced over the window, scans one
// probe per port ascending, brute force one attempt per second.
std::vector<AttackStep> attack_generate(const AttackSpec& spec);

// --- execution ---------------------------------------------------------------

struct RunResult {
    int exit_code = kExitOk;
    std::string failure;
    engine::RunMetrics metrics;
    std::string out_dir;
};

struct RunnerOptions {
    std::string out_dir = "out";
    bool write_outputs = true;
    bool echo = false;  // print step trace to stdout
    // Individual file overrides; default under out_dir.
    std::optional<std::string> alert_log;
    std::optional<std::string> mail_journal;
    std::optional<std::string> voicemail_journal;
    std::optional<std::string> metrics_file;
    // Extra student records loaded before the scenario's own seeds.
    std::optional<std::string> attendance_db;
};

RunResult run_scenario(const Scenario& scenario, const RunnerOptions& options);
RunResult run_scenario_file(const std::string& path, const RunnerOptions& options);

// Loads and cross-validates the five config files named by the scenario.
// Returns the parse/validation failure message when the configs are bad.
std::optional<std::string> load_configs(const Scenario& scenario, engine::Configs& out);

}  // namespace minipbx::scenario

#endif
