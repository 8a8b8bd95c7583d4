// pbxctl: scenario runner, UDP daemon and admin front end for the minipbx
// engine.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "minipbx/confkit.hpp"
#include "minipbx/digest.hpp"
#include "minipbx/engine.hpp"
#include "minipbx/scenario.hpp"

namespace fs = std::filesystem;
using namespace minipbx;

namespace {

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

// --- state files for the offline admin commands -----------------------------

std::string chain_state_path(const std::string& state_dir) {
    return (fs::path(state_dir) / "fw.chain").string();
}

pktfilter::Chain load_chain(const std::string& state_dir) {
    std::ifstream in(chain_state_path(state_dir));
    if (!in) return pktfilter::default_chain();
    pktfilter::Chain chain;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string proto, dport, src, verdict, tag;
        std::getline(ss, proto, '\t');
        std::getline(ss, dport, '\t');
        std::getline(ss, src, '\t');
        std::getline(ss, verdict, '\t');
        std::getline(ss, tag, '\t');
        pktfilter::FilterRule r;
        if (proto == "tcp") r.proto = pktfilter::Proto::Tcp;
        else if (proto == "udp") r.proto = pktfilter::Proto::Udp;
        else if (proto == "icmp") r.proto = pktfilter::Proto::Icmp;
        else r.proto = pktfilter::Proto::Any;
        if (dport != "-") r.dport = std::uint16_t(std::stoi(dport));
        if (src != "-") r.src = Ipv4::parse(src);
        if (verdict == "DROP") r.verdict = pktfilter::Verdict::Drop;
        else if (verdict == "REJECT") r.verdict = pktfilter::Verdict::Reject;
        else r.verdict = pktfilter::Verdict::Accept;
        r.tag = tag;
        chain.append(r);
    }
    return chain;
}

void save_chain(const std::string& state_dir, const pktfilter::Chain& chain) {
    fs::create_directories(state_dir);
    std::ofstream out(chain_state_path(state_dir), std::ios::binary);
    for (const auto& r : chain.rules()) {
        out << pktfilter::proto_name(r.proto) << '\t'
            << (r.dport ? std::to_string(*r.dport) : "-") << '\t'
            << (r.src ? r.src->str() : "-") << '\t' << pktfilter::verdict_name(r.verdict)
            << '\t' << r.tag << '\n';
    }
}

pktfilter::FilterRule rule_from_flags(const std::string& proto, int dport,
                                      const std::string& src, const std::string& verdict) {
    pktfilter::FilterRule r;
    if (proto == "tcp") r.proto = pktfilter::Proto::Tcp;
    else if (proto == "udp") r.proto = pktfilter::Proto::Udp;
    else if (proto == "icmp") r.proto = pktfilter::Proto::Icmp;
    else if (proto == "all" || proto == "any") r.proto = pktfilter::Proto::Any;
    else throw CLI::ValidationError("-p must be tcp, udp, icmp or all");
    if (dport >= 0) r.dport = std::uint16_t(dport);
    if (!src.empty()) {
        auto a = Ipv4::parse(src);
        if (!a) throw CLI::ValidationError("--src must be a dotted quad");
        r.src = a;
    }
    if (verdict == "ACCEPT") r.verdict = pktfilter::Verdict::Accept;
    else if (verdict == "DROP") r.verdict = pktfilter::Verdict::Drop;
    else if (verdict == "REJECT") r.verdict = pktfilter::Verdict::Reject;
    else throw CLI::ValidationError("-j must be ACCEPT, DROP or REJECT");
    return r;
}

// Grants state: the statement history, replayed on load.
acl::GrantTable load_grants(const std::string& path, std::vector<std::string>* history) {
    acl::GrantTable table;
    std::ifstream in(path);
    std::string line;
    while (in && std::getline(in, line)) {
        if (line.empty()) continue;
        table.apply(acl::parse_statement(line));
        if (history) history->push_back(line);
    }
    return table;
}

struct ConfigFlags {
    std::string sip_conf, extensions_conf, voicemail_conf, pptpd_conf, chap_secrets;

    void attach(CLI::App* app, bool require_core) {
        auto* s = app->add_option("--sip-conf", sip_conf, "sip.conf path");
        auto* e = app->add_option("--extensions-conf", extensions_conf, "extensions.conf path");
        auto* v = app->add_option("--voicemail-conf", voicemail_conf, "voicemail.conf path");
        app->add_option("--pptpd-conf", pptpd_conf, "pptpd.conf path");
        app->add_option("--chap-secrets", chap_secrets, "chap-secrets path");
        if (require_core) {
            s->required();
            e->required();
            v->required();
        }
    }

    engine::Configs load() const {
        engine::Configs configs;
        if (!sip_conf.empty())
            configs.peers = confkit::parse_sip_conf(confkit::read_file(sip_conf), sip_conf);
        if (!extensions_conf.empty())
            configs.dialplan_doc = confkit::parse_extensions_conf(
                confkit::read_file(extensions_conf), extensions_conf);
        if (!voicemail_conf.empty())
            configs.voicemail = confkit::parse_voicemail_conf(
                confkit::read_file(voicemail_conf), voicemail_conf);
        if (!pptpd_conf.empty() && !chap_secrets.empty()) {
            auto [cfg, creds] =
                confkit::parse_vpn_config(confkit::read_file(pptpd_conf),
                                          confkit::read_file(chap_secrets), pptpd_conf,
                                          chap_secrets);
            configs.tunnel = cfg;
            configs.credentials = std::move(creds);
        } else {
            configs.tunnel = {Ipv4(192, 168, 100, 37), Ipv4(192, 168, 100, 10),
                              Ipv4(192, 168, 100, 20)};
        }
        return configs;
    }
};

int run_daemon(const ConfigFlags& flags, std::uint16_t port, const std::string& db_path,
               const std::string& out_dir) {
    engine::Configs configs;
    try {
        configs = flags.load();
    } catch (const std::exception& e) {
        std::cerr << "pbxctl: " << e.what() << '\n';
        return scenario::kExitConfigInvalid;
    }
    auto report = engine::validate_configs(configs);
    if (!report.ok()) {
        std::cerr << "pbxctl: config validation failed\n";
        for (const auto* f : report.errors())
            std::cerr << "  " << f->file << ": " << f->message << '\n';
        return scenario::kExitConfigInvalid;
    }

    VirtualClock clock;
    engine::EngineOptions options;
    options.sip_port = port;
    engine::Pbx pbx(std::move(configs), options, clock);
    if (!db_path.empty()) {
        try {
            pbx.load_store(acl::AttendanceStore::load(confkit::read_file(db_path)));
        } catch (const std::exception& e) {
            std::cerr << "pbxctl: " << e.what() << '\n';
            return scenario::kExitConfigInvalid;
        }
    }
    pbx.start_services();

    int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) {
        std::cerr << "pbxctl: cannot open UDP socket\n";
        return 1;
    }
    sockaddr_in bind_addr{};
    bind_addr.sin_family = AF_INET;
    bind_addr.sin_addr.s_addr = INADDR_ANY;
    bind_addr.sin_port = htons(port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&bind_addr), sizeof(bind_addr)) != 0) {
        std::cerr << "pbxctl: cannot bind UDP port " << port << '\n';
        ::close(fd);
        return 1;
    }
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "pbxctl daemon listening on udp/" << port << " (ctrl-c stops)\n";

    auto started = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return VTime(std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - started)
                         .count());
    };

    char buf[65536];
    while (!g_stop) {
        clock.run_until(elapsed_ms());

        timeval tv{0, 100000};  // wake at least every 100 ms for timers
        if (auto next = clock.next_at()) {
            VTime wait = std::max<VTime>(1, *next - elapsed_ms());
            tv.tv_sec = wait / 1000;
            tv.tv_usec = (wait % 1000) * 1000;
        }
        ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));

        sockaddr_in from{};
        socklen_t from_len = sizeof(from);
        ssize_t n = ::recvfrom(fd, buf, sizeof(buf), 0, reinterpret_cast<sockaddr*>(&from),
                               &from_len);
        if (n <= 0) continue;

        pktfilter::Packet p;
        p.src = Ipv4(ntohl(from.sin_addr.s_addr));
        p.proto = pktfilter::Proto::Udp;
        p.dport = port;
        p.payload.assign(buf, buf + n);
        auto result = pbx.dispatch(std::move(p));
        if (result.response)
            ::sendto(fd, result.response->data(), result.response->size(), 0,
                     reinterpret_cast<sockaddr*>(&from), from_len);
    }

    pbx.stop_services();
    ::close(fd);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        auto write = [&](const char* name, const std::string& text) {
            std::ofstream(fs::path(out_dir) / name, std::ios::binary) << text;
        };
        write("alert.log", pbx.alert_log_text());
        write("mail.journal", pbx.mail_journal_text());
        write("voicemail.journal", pbx.voicemail_journal_text());
        write("metrics.txt", pbx.metrics().report());
    }
    std::cout << "pbxctl daemon stopped\n" << pbx.metrics().report();
    return 0;
}

std::string read_journal(const std::string& out_dir, const char* name) {
    return confkit::read_file((fs::path(out_dir) / name).string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"minipbx control tool"};
    app.require_subcommand(1);
    app.fallthrough();  // parent options may follow a leaf subcommand

    // --- run -----------------------------------------------------------------
    auto* run = app.add_subcommand("run", "execute a scenario file");
    std::string scenario_path;
    scenario::RunnerOptions run_opts;
    std::string opt_alert_log, opt_mail_journal, opt_vm_journal, opt_metrics, opt_db;
    run->add_option("scenario", scenario_path, "scenario file")->required();
    run->add_option("--out", run_opts.out_dir, "output directory (default ./out)");
    run->add_option("--alert-log", opt_alert_log, "alert log path override");
    run->add_option("--mail-journal", opt_mail_journal, "mail journal path override");
    run->add_option("--voicemail-journal", opt_vm_journal, "voicemail journal path override");
    run->add_option("--metrics", opt_metrics, "metrics report path override");
    run->add_option("--attendance-db", opt_db, "student records file (id, digest, attendance)");
    run->add_flag("--echo", run_opts.echo, "echo steps while running");

    // --- daemon ----------------------------------------------------------------
    auto* daemon = app.add_subcommand("daemon", "serve SIP over a real UDP socket");
    ConfigFlags daemon_flags;
    daemon_flags.attach(daemon, true);
    int daemon_port = sipnode::kDefaultSipPort;
    std::string transport = "udp";
    std::string daemon_db, daemon_out;
    daemon->add_option("--port", daemon_port, "SIP listen port (default 5060)");
    daemon->add_option("--transport", transport, "udp or sim (sim exits immediately)");
    daemon->add_option("--attendance-db", daemon_db, "student records file");
    daemon->add_option("--out", daemon_out, "journal directory written at shutdown");

    // --- plan ------------------------------------------------------------------
    auto* plan = app.add_subcommand("plan", "dial plan inspection");
    auto* plan_show = plan->add_subcommand("show", "dump the compiled dial plan");
    ConfigFlags plan_flags;
    plan_flags.attach(plan_show, true);

    // --- fw --------------------------------------------------------------------
    auto* fw = app.add_subcommand("fw", "packet filter chain admin");
    fw->fallthrough();
    std::string state_dir = "state";
    fw->add_option("--state", state_dir, "state directory (default ./state)");
    auto* fw_list = fw->add_subcommand("list", "print the chain");
    std::string fw_proto = "all", fw_src, fw_verdict = "ACCEPT";
    int fw_dport = -1;
    auto add_rule_flags = [&](CLI::App* cmd) {
        cmd->add_option("-p,--proto", fw_proto, "tcp|udp|icmp|all");
        cmd->add_option("--dport", fw_dport, "destination port");
        cmd->add_option("--src", fw_src, "source address");
        cmd->add_option("-j,--jump", fw_verdict, "ACCEPT|DROP|REJECT");
    };
    auto* fw_insert = fw->add_subcommand("insert", "insert a rule at the head (-I)");
    add_rule_flags(fw_insert);
    auto* fw_append = fw->add_subcommand("append", "append a rule (-A)");
    add_rule_flags(fw_append);
    auto* fw_delete = fw->add_subcommand("delete", "delete matching rules");
    add_rule_flags(fw_delete);

    // --- sentinel ----------------------------------------------------------------
    auto* sentinel_cmd = app.add_subcommand("sentinel", "IDS status and unblock");
    sentinel_cmd->fallthrough();
    std::string sentinel_out = "out";
    sentinel_cmd->add_option("--out", sentinel_out, "run output directory");
    sentinel_cmd->add_option("--state", state_dir, "state directory for unblock");
    auto* sentinel_status = sentinel_cmd->add_subcommand("status", "alert summary");
    auto* sentinel_unblock = sentinel_cmd->add_subcommand("unblock", "drop a blacklist rule");
    std::string unblock_src;
    sentinel_unblock->add_option("src", unblock_src, "address to unblock")->required();

    // --- vpn ---------------------------------------------------------------------
    auto* vpn = app.add_subcommand("vpn", "tunnel session table");
    vpn->fallthrough();
    std::string vpn_out = "out";
    vpn->add_option("--out", vpn_out, "run output directory");
    auto* vpn_sessions = vpn->add_subcommand("sessions", "list leased sessions");
    auto* vpn_kick = vpn->add_subcommand("kick", "remove a session row");
    std::string kick_user;
    vpn_kick->add_option("user", kick_user, "user to kick")->required();

    // --- db ------------------------------------------------------------------------
    auto* db = app.add_subcommand("db", "grant table admin");
    db->fallthrough();
    std::string grants_path = "state/grants.sql";
    db->add_option("--grants", grants_path, "grants statement journal");
    auto* db_grant = db->add_subcommand("grant", "apply a GRANT statement");
    auto* db_revoke = db->add_subcommand("revoke", "apply a REVOKE statement");
    std::string db_stmt;
    db_grant->add_option("statement", db_stmt, "full statement text")->required();
    db_revoke->add_option("statement", db_stmt, "full statement text")->required();
    auto* db_check = db->add_subcommand("check", "evaluate an authorization check");
    std::string check_principal, check_priv, check_scope;
    db_check->add_option("principal", check_principal, "user@host")->required();
    db_check->add_option("privilege", check_priv, "access privilege name")->required();
    db_check->add_option("object", check_scope, "db.table")->required();

    // --- mail ------------------------------------------------------------------------
    auto* mail = app.add_subcommand("mail", "notification journal");
    mail->fallthrough();
    std::string mail_out = "out";
    std::string mail_category;
    mail->add_option("--out", mail_out, "run output directory");
    auto* mail_list = mail->add_subcommand("list", "list notifications");
    mail_list->add_option("--category", mail_category, "admin-alert or voicemail-notice");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            if (!opt_alert_log.empty()) run_opts.alert_log = opt_alert_log;
            if (!opt_mail_journal.empty()) run_opts.mail_journal = opt_mail_journal;
            if (!opt_vm_journal.empty()) run_opts.voicemail_journal = opt_vm_journal;
            if (!opt_metrics.empty()) run_opts.metrics_file = opt_metrics;
            if (!opt_db.empty()) run_opts.attendance_db = opt_db;
            auto result = scenario::run_scenario_file(scenario_path, run_opts);
            if (result.exit_code == scenario::kExitConfigInvalid) {
                std::cerr << "pbxctl: " << result.failure << '\n';
            } else if (result.exit_code != 0) {
                std::cerr << "pbxctl: scenario failed: " << result.failure << '\n';
            } else {
                std::cout << result.metrics.report();
            }
            return result.exit_code;
        }

        if (*daemon) {
            if (transport == "sim") {
                std::cout << "sim transport selected; scenarios drive the sim channel via "
                             "`pbxctl run`\n";
                return 0;
            }
            return run_daemon(daemon_flags, std::uint16_t(daemon_port), daemon_db, daemon_out);
        }

        if (*plan_show) {
            auto configs = plan_flags.load();
            auto report = engine::validate_configs(configs);
            if (!report.ok()) {
                std::cerr << "validation failed:\n";
                for (const auto* f : report.errors())
                    std::cerr << "  " << f->file << ": " << f->message << '\n';
                return scenario::kExitConfigInvalid;
            }
            auto plan_compiled = dialplan::Dialplan::compile(configs.dialplan_doc, report);
            std::cout << plan_compiled.dump();
            return 0;
        }

        if (*fw) {
            auto chain = load_chain(state_dir);
            if (*fw_list) {
                std::cout << chain.dump();
                return 0;
            }
            auto rule = rule_from_flags(fw_proto, fw_dport, fw_src, fw_verdict);
            if (*fw_insert) chain.insert_head(rule);
            if (*fw_append) chain.append(rule);
            if (*fw_delete) {
                std::size_t removed = chain.delete_matching([&](const pktfilter::FilterRule& r) {
                    return r.proto == rule.proto && r.dport == rule.dport &&
                           r.src == rule.src && r.verdict == rule.verdict;
                });
                std::cout << "deleted " << removed << " rule(s)\n";
            }
            save_chain(state_dir, chain);
            std::cout << chain.dump();
            return 0;
        }

        if (*sentinel_status) {
            std::string log = read_journal(sentinel_out, "alert.log");
            std::map<std::string, int> per_level;
            std::stringstream ss(log);
            std::string line;
            int total = 0;
            while (std::getline(ss, line)) {
                if (line.empty()) continue;
                ++total;
                auto first_tab = line.find('\t');
                auto second_tab = line.find('\t', first_tab + 1);
                per_level["level " + line.substr(first_tab + 1, second_tab - first_tab - 1)]++;
            }
            std::cout << "alerts: " << total << '\n';
            for (const auto& [k, v] : per_level) std::cout << "  " << k << ": " << v << '\n';
            return 0;
        }
        if (*sentinel_unblock) {
            auto src = Ipv4::parse(unblock_src);
            if (!src) {
                std::cerr << "pbxctl: bad address\n";
                return 1;
            }
            auto chain = load_chain(state_dir);
            std::size_t removed = chain.delete_matching([&](const pktfilter::FilterRule& r) {
                return r.tag == sentinel::Sentinel::blacklist_tag(*src);
            });
            save_chain(state_dir, chain);
            std::cout << "removed " << removed << " blacklist rule(s) for " << src->str()
                      << '\n';
            return 0;
        }

        if (*vpn_sessions) {
            std::cout << read_journal(vpn_out, "vpn-sessions.tsv");
            return 0;
        }
        if (*vpn_kick) {
            auto path = (fs::path(vpn_out) / "vpn-sessions.tsv").string();
            std::string table = confkit::read_file(path);
            std::stringstream ss(table);
            std::ostringstream keep;
            std::string line;
            int removed = 0;
            while (std::getline(ss, line)) {
                if (line.rfind(kick_user + "\t", 0) == 0) {
                    ++removed;
                    continue;
                }
                if (!line.empty()) keep << line << '\n';
            }
            std::ofstream(path, std::ios::binary) << keep.str();
            std::cout << "kicked " << removed << " session(s)\n";
            return 0;
        }

        if (*db_grant || *db_revoke) {
            std::vector<std::string> history;
            auto table = load_grants(grants_path, &history);
            auto stmt = acl::parse_statement(db_stmt);
            if (*db_grant && stmt.kind != acl::Statement::Kind::Grant) {
                std::cerr << "pbxctl: grant subcommand needs a GRANT statement\n";
                return 1;
            }
            if (*db_revoke && stmt.kind != acl::Statement::Kind::Revoke) {
                std::cerr << "pbxctl: revoke subcommand needs a REVOKE statement\n";
                return 1;
            }
            for (const auto& warning : table.apply(stmt))
                std::cout << "warning: " << warning << '\n';
            fs::create_directories(fs::path(grants_path).parent_path());
            std::ofstream out(grants_path, std::ios::binary);
            for (const auto& h : history) out << h << '\n';
            out << db_stmt << '\n';
            std::cout << table.dump();
            return 0;
        }
        if (*db_check) {
            auto table = load_grants(grants_path, nullptr);
            auto at = check_principal.find('@');
            if (at == std::string::npos) {
                std::cerr << "pbxctl: principal must be user@host\n";
                return 1;
            }
            acl::Principal who{check_principal.substr(0, at), check_principal.substr(at + 1)};
            auto priv = acl::privilege_from_name(check_priv);
            if (!priv) {
                std::cerr << "pbxctl: unknown access privilege '" << check_priv << "'\n";
                return 1;
            }
            auto dot = check_scope.find('.');
            if (dot == std::string::npos) {
                std::cerr << "pbxctl: object must be db.table\n";
                return 1;
            }
            acl::ObjectScope object{check_scope.substr(0, dot), check_scope.substr(dot + 1)};
            bool allowed = table.check(who, *priv, object);
            std::cout << (allowed ? "ALLOWED" : "DENIED") << '\n';
            return allowed ? 0 : 1;
        }

        if (*mail_list) {
            std::string journal = read_journal(mail_out, "mail.journal");
            std::stringstream ss(journal);
            std::string line;
            bool keep_block = mail_category.empty();
            std::ostringstream block;
            auto flush = [&] {
                if (keep_block && block.tellp() > 0) std::cout << block.str() << '\n';
                block.str("");
                keep_block = mail_category.empty();
            };
            bool in_body = false;
            while (std::getline(ss, line)) {
                if (line.rfind("To: ", 0) == 0 && in_body) {
                    flush();
                    in_body = false;
                }
                if (line.rfind("Category: ", 0) == 0 && !mail_category.empty())
                    keep_block = line.substr(10) == mail_category;
                if (line.empty()) in_body = true;
                block << line << '\n';
            }
            flush();
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "pbxctl: " << e.what() << '\n';
        return 1;
    }

    std::cerr << app.help();
    return 1;
}
