#include "mqttbed/broker/auth.hpp"

namespace mqttbed::broker {

Authenticator::Authenticator(const SecurityPolicy& policy)
    : policy_(policy), dummy_(PasswordVerifier::from_password("\x01unused-dummy\x01")) {}

AuthResult Authenticator::check(const std::optional<wire::Credentials>& credentials) const {
    if (!credentials) return policy_.allow_anonymous ? AuthResult::Accepted : AuthResult::NotAuthorized;

    auto it = policy_.credentials.find(credentials->username);
    const PasswordVerifier& verifier = it != policy_.credentials.end() ? it->second : dummy_;
    std::string_view password;
    if (credentials->password)
        password = std::string_view(reinterpret_cast<const char*>(credentials->password->data()),
                                    credentials->password->size());
    bool ok = verifier.matches(password);
    bool known = it != policy_.credentials.end();
    bool has_password = credentials->password.has_value();
    return (ok & known & has_password) ? AuthResult::Accepted : AuthResult::BadCredentials;
}

}  // namespace mqttbed::broker
