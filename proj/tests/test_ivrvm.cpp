#include <doctest.h>

#include "minipbx/digest.hpp"
#include "minipbx/ivrvm.hpp"

using namespace minipbx;
using namespace minipbx::ivrvm;
using dialplan::Action;

TEST_SUITE_BEGIN("ivrvm");

namespace {

bool has_play(const std::vector<Action>& actions, const std::string& token) {
    for (const auto& a : actions)
        if (const auto* p = std::get_if<dialplan::Play>(&a))
            if (p->file == token) return true;
    return false;
}

bool has_say(const std::vector<Action>& actions, const std::string& digits) {
    for (const auto& a : actions)
        if (const auto* s = std::get_if<dialplan::SayDigits>(&a))
            if (s->digits == digits) return true;
    return false;
}

bool has_hangup(const std::vector<Action>& actions) {
    for (const auto& a : actions)
        if (std::holds_alternative<dialplan::Hangup>(a)) return true;
    return false;
}

IvrEvent digits(const std::string& d) { return {IvrEvent::Kind::Digits, d, 0}; }
IvrEvent query_ok(int v) { return {IvrEvent::Kind::QueryOk, "", v}; }
IvrEvent query_fail() { return {IvrEvent::Kind::QueryFail, "", 0}; }

struct StoreRig {
    acl::AttendanceStore store;
    acl::GrantTable grants;
    acl::Principal ivr{"ivr", "local"};
    acl::ObjectScope scope{"minipbx", "attendance"};
    StoreGateway gateway;

    StoreRig() {
        store.upsert({"1001", md5_hex("2222"), 87});
        store.upsert({"1002", md5_hex("3333"), 64});
        acl::Statement grant;
        grant.privileges = {acl::Privilege::Select};
        grant.scope = scope;
        grant.principal = ivr;
        grants.apply(grant);
        gateway = make_acl_gateway(ivr, store, grants, scope);
    }
};

}  // namespace

TEST_CASE("happy path: welcome, credentials, readout, done") {
    IvrSession s;
    auto [a1, s1] = run_ivr(s, {IvrEvent::Kind::Start, "", 0});
    CHECK(has_play(a1, prompts::kWelcome));
    CHECK(s1.phase == IvrPhase::ReadId);

    auto [a2, s2] = run_ivr(s1, digits("1001"));
    CHECK(s2.entered_id == "1001");
    CHECK(s2.phase == IvrPhase::ReadPw);

    auto [a3, s3] = run_ivr(s2, digits("2222"));
    CHECK(s3.entered_pw == "2222");
    CHECK(s3.phase == IvrPhase::Verify);
    REQUIRE(a3.size() == 1);
    CHECK(std::holds_alternative<dialplan::Query>(a3[0]));

    auto [a4, s4] = run_ivr(s3, query_ok(87));
    CHECK(has_play(a4, prompts::kAttendanceIs));
    CHECK(has_say(a4, "87"));
    CHECK(s4.phase == IvrPhase::AgainQ);

    auto [a5, s5] = run_ivr(s4, digits("2"));
    CHECK(has_hangup(a5));
    CHECK(s5.phase == IvrPhase::Done);
}

TEST_CASE("menu digit 1 loops back to ask-id") {
    IvrSession s;
    s.phase = IvrPhase::AgainQ;
    auto [actions, next] = run_ivr(s, digits("1"));
    CHECK(next.phase == IvrPhase::ReadId);
    bool asks_id = false;
    for (const auto& a : actions)
        if (const auto* r = std::get_if<dialplan::Read>(&a))
            asks_id = r->prompt == prompts::kEnterId;
    CHECK(asks_id);
}

TEST_CASE("wrong password plays bad-password and loops to ask-id") {
    IvrSession s;
    s.phase = IvrPhase::Verify;
    auto [actions, next] = run_ivr(s, query_fail());
    CHECK(has_play(actions, prompts::kBadPassword));
    CHECK_FALSE(has_hangup(actions));
    CHECK(next.phase == IvrPhase::ReadId);
    CHECK(next.retries == 1);
}

TEST_CASE("three consecutive failures with cap 3 hang up") {
    IvrSession s;
    s.retry_cap = 3;
    s.phase = IvrPhase::Verify;
    auto [a1, s1] = run_ivr(s, query_fail());
    CHECK_FALSE(has_hangup(a1));
    s1.phase = IvrPhase::Verify;
    auto [a2, s2] = run_ivr(s1, query_fail());
    CHECK_FALSE(has_hangup(a2));
    s2.phase = IvrPhase::Verify;
    auto [a3, s3] = run_ivr(s2, query_fail());
    CHECK(has_play(a3, prompts::kBadPassword));
    CHECK(has_hangup(a3));
    CHECK(s3.phase == IvrPhase::Done);
}

TEST_CASE("a success resets the retry counter") {
    IvrSession s;
    s.phase = IvrPhase::Verify;
    s.retries = 2;
    auto [actions, next] = run_ivr(s, query_ok(64));
    CHECK(next.retries == 0);
}

TEST_CASE("the readout never precedes a successful verify") {
    // no action list emitted before the QueryOk event may contain SayDigits
    IvrSession s;
    auto [a1, s1] = run_ivr(s, {IvrEvent::Kind::Start, "", 0});
    auto [a2, s2] = run_ivr(s1, digits("1001"));
    auto [a3, s3] = run_ivr(s2, digits("9999"));
    auto [a4, s4] = run_ivr(s3, query_fail());
    for (const auto* actions : {&a1, &a2, &a3, &a4})
        for (const auto& a : *actions)
            CHECK_FALSE(std::holds_alternative<dialplan::SayDigits>(a));
}

TEST_CASE("service error plays the apology and hangs up, not bad-password") {
    IvrSession s;
    s.phase = IvrPhase::Verify;
    auto [actions, next] = run_ivr(s, {IvrEvent::Kind::ServiceError, "", 0});
    CHECK(has_play(actions, prompts::kServiceUnavailable));
    CHECK_FALSE(has_play(actions, prompts::kBadPassword));
    CHECK(has_hangup(actions));
    CHECK(next.phase == IvrPhase::Done);
}

TEST_CASE("timeout hangs up from any phase") {
    for (IvrPhase phase : {IvrPhase::Welcome, IvrPhase::ReadId, IvrPhase::Verify,
                           IvrPhase::AgainQ}) {
        IvrSession s;
        s.phase = phase;
        auto [actions, next] = run_ivr(s, {IvrEvent::Kind::Timeout, "", 0});
        CHECK(has_hangup(actions));
        CHECK(next.phase == IvrPhase::Done);
    }
}

TEST_CASE("events that do not match the phase are protocol errors") {
    IvrSession s;  // welcome phase
    CHECK_THROWS_AS(run_ivr(s, digits("1")), IvrError);
    s.phase = IvrPhase::ReadId;
    CHECK_THROWS_AS(run_ivr(s, query_ok(1)), IvrError);
}

// --- authenticate over the acl gateway -----------------------------------

TEST_CASE("authenticate: exact match required") {
    StoreRig rig;
    auto r1 = authenticate("1001", "2222", rig.gateway);
    REQUIRE(std::holds_alternative<bool>(r1));
    CHECK(std::get<bool>(r1));

    auto r2 = authenticate("1001", "2223", rig.gateway);
    CHECK_FALSE(std::get<bool>(r2));

    auto r3 = authenticate("0000", "anything", rig.gateway);
    CHECK_FALSE(std::get<bool>(r3));
}

TEST_CASE("authenticate: a revoked gateway is a service error, not a bad password") {
    StoreRig rig;
    acl::Statement revoke;
    revoke.kind = acl::Statement::Kind::Revoke;
    revoke.privileges = {acl::Privilege::Select};
    revoke.scope = rig.scope;
    revoke.principal = rig.ivr;
    rig.grants.apply(revoke);

    auto r = authenticate("1001", "2222", rig.gateway);
    REQUIRE(std::holds_alternative<AuthError>(r));
    CHECK(std::get<AuthError>(r) == AuthError::ServiceUnavailable);
}

// --- voicemail store -------------------------------------------------------

namespace {

VoicemailStore demo_vm() {
    return VoicemailStore(confkit::parse_voicemail_conf(
        "[vmail]\n756 => 1234, username, username@domain.com\n757 => 4321, r, r@d.com\n"));
}

}  // namespace

TEST_CASE("deposit appends a message and notifies the owner") {
    auto vm = demo_vm();
    notify::Sink mail;
    auto receipt = vm.deposit("756", "vmail", "harish", "vm-c1", 5000, mail);
    REQUIRE(std::holds_alternative<DepositReceipt>(receipt));
    CHECK(vm.message_count("756", "vmail") == 1);

    auto notices = mail.drain(notify::Category::VoicemailNotice);
    REQUIRE(notices.size() == 1);
    CHECK(notices[0]->to == "username@domain.com");
    CHECK(notices[0]->subject.find("harish") != std::string::npos);
    CHECK(notices[0]->subject.find("756") != std::string::npos);
}

TEST_CASE("two deposits preserve order") {
    auto vm = demo_vm();
    notify::Sink mail;
    vm.deposit("756", "vmail", "harish", "first", 1000, mail);
    vm.deposit("756", "vmail", "ramesh", "second", 2000, mail);
    auto msgs = vm.retrieve("756", "vmail", "1234");
    REQUIRE(std::holds_alternative<std::vector<VmMessage>>(msgs));
    const auto& list = std::get<std::vector<VmMessage>>(msgs);
    REQUIRE(list.size() == 2);
    CHECK(list[0].payload_ref == "first");
    CHECK(list[1].payload_ref == "second");
}

TEST_CASE("deposit to an absent box is an error") {
    auto vm = demo_vm();
    notify::Sink mail;
    auto receipt = vm.deposit("999", "vmail", "x", "p", 0, mail);
    REQUIRE(std::holds_alternative<VmError>(receipt));
    CHECK(std::get<VmError>(receipt) == VmError::UnknownBox);
    CHECK(mail.size() == 0);
}

TEST_CASE("retrieve: password gate") {
    auto vm = demo_vm();
    notify::Sink mail;
    vm.deposit("756", "vmail", "h", "p", 0, mail);
    auto wrong = vm.retrieve("756", "vmail", "9999");
    REQUIRE(std::holds_alternative<VmError>(wrong));
    CHECK(std::get<VmError>(wrong) == VmError::WrongPassword);

    auto empty_ok = vm.retrieve("757", "vmail", "4321");
    REQUIRE(std::holds_alternative<std::vector<VmMessage>>(empty_ok));
    CHECK(std::get<std::vector<VmMessage>>(empty_ok).empty());

    auto unknown = vm.retrieve("999", "vmail", "1");
    REQUIRE(std::holds_alternative<VmError>(unknown));
    CHECK(std::get<VmError>(unknown) == VmError::UnknownBox);
}

TEST_CASE("journal lines carry timestamp, box, caller and payload ref") {
    auto vm = demo_vm();
    notify::Sink mail;
    vm.deposit("756", "vmail", "harish", "vm-c9", 21000, mail);
    CHECK(vm.journal() == "1970-01-01T00:00:21.000Z\t756@vmail\tharish\tvm-c9\n");
}

TEST_SUITE_END();
