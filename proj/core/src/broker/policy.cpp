#include "mqttbed/broker/policy.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include <cctype>

#include "mqttbed/wire/topic.hpp"

namespace mqttbed::broker {

std::string principal_label(const Principal& p) { return p ? *p : std::string("@anonymous"); }

PasswordVerifier PasswordVerifier::from_password(std::string_view password) {
    Salt salt{};
    if (RAND_bytes(salt.data(), static_cast<int>(salt.size())) != 1)
        throw PolicyError("unable to draw a random salt");
    return from_password(password, salt);
}

PasswordVerifier PasswordVerifier::from_password(std::string_view password, const Salt& salt) {
    Digest digest{};
    if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()), salt.data(),
                          static_cast<int>(salt.size()), kIterations, EVP_sha256(),
                          static_cast<int>(digest.size()), digest.data()) != 1)
        throw PolicyError("PBKDF2 derivation failed");
    return PasswordVerifier(salt, digest);
}

bool PasswordVerifier::matches(std::string_view password) const {
    auto candidate = from_password(password, salt_);
    return CRYPTO_memcmp(candidate.digest_.data(), digest_.data(), digest_.size()) == 0;
}

std::string_view violation_name(PasswordViolation v) {
    switch (v) {
        case PasswordViolation::TooShort: return "too_short";
        case PasswordViolation::TooFewClasses: return "too_few_character_classes";
    }
    return "unknown";
}

int character_classes(std::string_view password) {
    bool lower = false, upper = false, digit = false, other = false;
    for (unsigned char c : password) {
        if (std::islower(c)) lower = true;
        else if (std::isupper(c)) upper = true;
        else if (std::isdigit(c)) digit = true;
        else other = true;
    }
    return int(lower) + int(upper) + int(digit) + int(other);
}

std::vector<PasswordViolation> validate_password_policy(std::string_view password,
                                                        const PasswordPolicy& policy) {
    std::vector<PasswordViolation> out;
    if (password.size() < policy.min_length) out.push_back(PasswordViolation::TooShort);
    if (character_classes(password) < policy.require_classes)
        out.push_back(PasswordViolation::TooFewClasses);
    return out;
}

void SecurityPolicy::add_user(const std::string& username, std::string_view password) {
    if (username.empty()) throw PolicyError("username must not be empty");
    if (password_policy) {
        auto violations = validate_password_policy(password, *password_policy);
        if (!violations.empty()) {
            std::string msg = "password for '" + username + "' violates policy:";
            for (auto v : violations) msg += " " + std::string(violation_name(v));
            throw PolicyError(msg);
        }
    }
    credentials.insert_or_assign(username, PasswordVerifier::from_password(password));
}

void SecurityPolicy::validate() const {
    if (ban_policy) {
        if (ban_policy->max_failures == 0) throw PolicyError("ban_policy.max_failures must be positive");
        if (ban_policy->window.count() <= 0) throw PolicyError("ban_policy.window must be positive");
        if (ban_policy->ban_duration.count() <= 0)
            throw PolicyError("ban_policy.ban_duration must be positive");
    }
    if (password_policy && (password_policy->require_classes < 0 || password_policy->require_classes > 4))
        throw PolicyError("password_policy.require_classes must be in 0..4");
    for (const auto& e : acl) {
        if (!e.allow_publish && !e.allow_subscribe)
            throw PolicyError("ACL entry for " + principal_label(e.principal) + " on '" + e.filter +
                              "' grants nothing");
        if (!wire::is_valid_topic_filter(e.filter))
            throw PolicyError("ACL entry filter '" + e.filter + "' is not a valid topic filter");
    }
}

}  // namespace mqttbed::broker
