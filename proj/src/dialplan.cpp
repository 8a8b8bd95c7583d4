#include "minipbx/dialplan.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace minipbx::dialplan {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> split_args(const std::string& args) {
    std::vector<std::string> out;
    std::stringstream ss(args);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

// ${name} substitution against the digit-string registers.
std::string resolve(const std::string& text, const ExecState& state) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto dollar = text.find("${", pos);
        if (dollar == std::string::npos) {
            out += text.substr(pos);
            break;
        }
        auto close = text.find('}', dollar);
        if (close == std::string::npos) {
            out += text.substr(pos);
            break;
        }
        out += text.substr(pos, dollar - pos);
        std::string name = text.substr(dollar + 2, close - dollar - 2);
        auto it = state.regs.find(name);
        if (it != state.regs.end()) out += it->second;
        pos = close + 1;
    }
    return out;
}

}  // namespace

const char* action_name(const Action& a) {
    struct Visitor {
        const char* operator()(const Play&) { return "Play"; }
        const char* operator()(const Hangup&) { return "Hangup"; }
        const char* operator()(const Read&) { return "Read"; }
        const char* operator()(const Goto&) { return "Goto"; }
        const char* operator()(const Dial&) { return "Dial"; }
        const char* operator()(const Query&) { return "Query"; }
        const char* operator()(const SayDigits&) { return "SayDigits"; }
        const char* operator()(const VoiceMail&) { return "VoiceMail"; }
    };
    return std::visit(Visitor{}, a);
}

std::string action_text(const Action& a) {
    std::ostringstream out;
    out << action_name(a);
    if (const auto* p = std::get_if<Play>(&a)) out << '(' << p->file << ')';
    if (const auto* r = std::get_if<Read>(&a)) out << '(' << r->into << ", " << r->prompt << ')';
    if (const auto* g = std::get_if<Goto>(&a)) {
        out << '(';
        if (g->target.context) out << *g->target.context << ',';
        if (g->target.exten) out << *g->target.exten << ',';
        out << g->target.priority << ')';
    }
    if (const auto* d = std::get_if<Dial>(&a))
        out << '(' << d->target << ", " << d->timeout / kMillisPerSecond << ')';
    if (const auto* q = std::get_if<Query>(&a)) out << '(' << q->statement << ')';
    if (const auto* s = std::get_if<SayDigits>(&a)) out << '(' << s->digits << ')';
    if (const auto* v = std::get_if<VoiceMail>(&a)) out << '(' << v->box << '@' << v->context << ')';
    if (std::holds_alternative<Hangup>(a)) out << "()";
    return out.str();
}

bool action_awaits(const Action& a) {
    return std::holds_alternative<Read>(a) || std::holds_alternative<Dial>(a) ||
           std::holds_alternative<Query>(a);
}

Dialplan Dialplan::compile(const confkit::DialplanDoc& doc,
                           const confkit::ValidationReport& report) {
    if (!report.ok()) {
        std::string first = report.errors().empty() ? "unknown" : report.errors()[0]->message;
        throw CompileError("cannot compile: validation failed (" + first + ")");
    }
    Dialplan plan;
    for (const auto& ctx : doc.contexts) {
        for (const auto& line : ctx.lines) {
            auto& lines = plan.index_[{ctx.name, line.exten}];
            for (const auto& existing : lines)
                if (existing.priority == line.priority)
                    throw CompileError("duplicate priority " + std::to_string(line.priority) +
                                       " for " + ctx.name + "," + line.exten);
            lines.push_back({line.priority, line.op});
        }
    }
    for (auto& [key, lines] : plan.index_)
        std::sort(lines.begin(), lines.end(),
                  [](const PlanLine& a, const PlanLine& b) { return a.priority < b.priority; });
    return plan;
}

const std::vector<PlanLine>* Dialplan::lines(const std::string& context,
                                             const std::string& exten) const {
    auto it = index_.find({context, exten});
    return it == index_.end() ? nullptr : &it->second;
}

bool Dialplan::has_exten(const std::string& context, const std::string& exten) const {
    return index_.count({context, exten}) > 0;
}

std::string Dialplan::dump() const {
    std::ostringstream out;
    std::string last_ctx;
    for (const auto& [key, lines] : index_) {
        if (key.first != last_ctx) {
            out << '[' << key.first << "]\n";
            last_ctx = key.first;
        }
        for (const auto& l : lines)
            out << "  " << key.second << ',' << l.priority << ": " << l.op.name << '('
                << l.op.args << ")\n";
    }
    return out.str();
}

ExecState make_state(const std::string& context, const std::string& exten) {
    ExecState s;
    s.context = context;
    s.exten = exten;
    return s;
}

namespace {

Action finish(ExecState& state) {
    state.done = true;
    state.pending = ExecState::Pending::None;
    return Hangup{};
}

std::optional<GotoTarget> parse_goto_target(const std::string& args) {
    auto parts = split_args(args);
    GotoTarget t;
    try {
        if (parts.size() == 1) {
            t.priority = std::stoi(parts[0]);
        } else if (parts.size() == 2) {
            t.exten = parts[0];
            t.priority = std::stoi(parts[1]);
        } else if (parts.size() == 3) {
            t.context = parts[0];
            t.exten = parts[1];
            t.priority = std::stoi(parts[2]);
        } else {
            return std::nullopt;
        }
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return t;
}

}  // namespace

Action step(const Dialplan& plan, ExecState& state, const StepInput& input) {
    if (state.done) return Hangup{};

    // Resolve a pending await first.
    switch (state.pending) {
        case ExecState::Pending::None:
            break;
        case ExecState::Pending::Digits: {
            if (!input.digits)
                throw RuntimeError("Read is pending; step needs collected digits");
            std::string digits = *input.digits;
            if (!digits.empty() && digits.back() == kReadTerminator) digits.pop_back();
            state.regs[state.pending_register] = digits;
            state.pending = ExecState::Pending::None;
            ++state.cursor;
            break;
        }
        case ExecState::Pending::DialResult: {
            if (!input.dial_answered)
                throw RuntimeError("Dial is pending; step needs an answer/timeout signal");
            state.pending = ExecState::Pending::None;
            if (*input.dial_answered) {
                // the call ran to completion inside Dial; the plan is done
                return finish(state);
            }
            ++state.cursor;  // no answer: fall through to the next priority
            break;
        }
        case ExecState::Pending::QueryResult: {
            if (!input.query_result)
                throw RuntimeError("Query is pending; step needs a result");
            state.regs["result"] = *input.query_result;
            state.pending = ExecState::Pending::None;
            ++state.cursor;
            break;
        }
    }

    for (;;) {
        if (++state.steps > kStepBudget) {
            state.budget_exhausted = true;
            state.runtime_error = "step budget exhausted (loop in dial plan?)";
            return finish(state);
        }

        const auto* lines = plan.lines(state.context, state.exten);
        if (!lines || state.cursor >= lines->size()) return finish(state);

        const PlanLine& line = (*lines)[state.cursor];
        std::string name = lower(line.op.name);
        std::string args = resolve(line.op.args, state);

        if (name == "playback") {
            ++state.cursor;
            return Play{trim(args)};
        }
        if (name == "hangup") {
            return finish(state);
        }
        if (name == "read") {
            auto parts = split_args(args);
            if (parts.empty() || parts[0].empty()) {
                state.runtime_error = "Read needs a register name";
                return finish(state);
            }
            state.pending = ExecState::Pending::Digits;
            state.pending_register = parts[0];
            return Read{parts[0], parts.size() > 1 ? parts[1] : ""};
        }
        if (name == "goto") {
            auto target = parse_goto_target(args);
            if (!target) {
                state.runtime_error = "malformed Goto target '" + args + "'";
                return finish(state);
            }
            std::string ctx = target->context.value_or(state.context);
            std::string ext = target->exten.value_or(state.exten);
            const auto* dest = plan.lines(ctx, ext);
            std::size_t idx = 0;
            bool found = false;
            if (dest) {
                for (; idx < dest->size(); ++idx) {
                    if ((*dest)[idx].priority == target->priority) {
                        found = true;
                        break;
                    }
                }
            }
            if (!found) {
                state.runtime_error = "Goto target " + ctx + "," + ext + "," +
                                      std::to_string(target->priority) + " does not exist";
                return finish(state);
            }
            state.context = ctx;
            state.exten = ext;
            state.cursor = idx;
            return Goto{*target};
        }
        if (name == "dial") {
            auto parts = split_args(args);
            if (parts.empty() || parts[0].empty()) {
                state.runtime_error = "Dial needs a target";
                return finish(state);
            }
            Dial d;
            d.target = parts[0];
            if (parts.size() > 1) {
                try {
                    d.timeout = VTime(std::stol(parts[1])) * kMillisPerSecond;
                } catch (const std::exception&) {
                    state.runtime_error = "bad Dial timeout '" + parts[1] + "'";
                    return finish(state);
                }
            }
            state.pending = ExecState::Pending::DialResult;
            return d;
        }
        if (name == "mysql") {
            state.pending = ExecState::Pending::QueryResult;
            return Query{trim(args)};
        }
        if (name == "saydigits") {
            ++state.cursor;
            return SayDigits{trim(args)};
        }
        if (name == "voicemailmain") {
            std::string a = trim(args);
            auto at = a.find('@');
            VoiceMail vm;
            if (at == std::string::npos) {
                vm.box = a;
            } else {
                vm.box = trim(a.substr(0, at));
                vm.context = trim(a.substr(at + 1));
            }
            ++state.cursor;
            return vm;
        }

        // Unknown operation (validator already warned): skip it.
        ++state.cursor;
    }
}

}  // namespace minipbx::dialplan
