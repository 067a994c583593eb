// Copyright 2026 The Faultline Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <stdexcept>
#include <string>
#include <string_view>

#include "faultline/faults.h"

namespace faultline {

namespace {

// Browser-style "site can't be reached" page.
constexpr std::string_view kNetworkErrorHtml = R"html(<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>This site can't be reached</title>
<style>
body { font-family: Arial, sans-serif; background: #fff; color: #202124; margin: 0; }
.wrap { max-width: 600px; margin: 14vh auto 0; padding: 0 24px; }
h1 { font-size: 1.6em; font-weight: normal; }
.code { color: #5f6368; font-size: 0.85em; text-transform: uppercase; }
button { background: #1a73e8; color: #fff; border: 0; border-radius: 4px; padding: 8px 16px; font-size: 0.95em; }
</style>
</head>
<body>
<div class="wrap" data-faultline-page="network_error">
<h1>This site can't be reached</h1>
<p>The connection was reset or the server took too long to respond.</p>
<p>Try:</p>
<ul>
<li>Checking the connection</li>
<li>Reloading the page</li>
</ul>
<p class="code">ERR_CONNECTION_TIMED_OUT</p>
<button type="button" onclick="location.reload()">Reload</button>
</div>
</body>
</html>
)html";

constexpr std::string_view kServerErrorHtml = R"html(<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>{{status_code}} {{reason}}</title>
<style>
body { font-family: Arial, sans-serif; background: #f8f8f8; color: #333; margin: 0; }
.wrap { max-width: 640px; margin: 12vh auto 0; padding: 0 24px; text-align: center; }
h1 { font-size: 4em; margin: 0; color: #c0392b; }
h2 { font-weight: normal; }
</style>
</head>
<body>
<div class="wrap" data-faultline-page="server_error">
<h1>{{status_code}}</h1>
<h2>{{reason}}</h2>
<p>The server encountered an error and could not complete your request.</p>
<p>Please try again later.</p>
</div>
</body>
</html>
)html";

constexpr std::string_view kGatewayTimeoutHtml = R"html(<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>504 Gateway Timeout</title>
<style>
body { font-family: Arial, sans-serif; background: #fff; color: #333; margin: 0; }
.wrap { max-width: 640px; margin: 12vh auto 0; padding: 0 24px; text-align: center; }
h1 { font-size: 2.2em; }
</style>
</head>
<body>
<div class="wrap" data-faultline-page="gateway_timeout">
<h1>504 Gateway Timeout</h1>
<p>The upstream server did not respond in time.</p>
<hr>
<p>gateway</p>
</div>
</body>
</html>
)html";

// Full-viewport overlay with a large green call-to-action button.
constexpr std::string_view kMaliciousPopupHtml = R"html(<div data-faultline-popup="malicious" style="position:fixed;top:0;left:0;width:100vw;height:100vh;z-index:2147483647;background:rgba(0,0,0,0.78);display:flex;align-items:center;justify-content:center;font-family:Arial,sans-serif;">
<div role="dialog" aria-modal="true" style="background:#ffffff;border-radius:14px;padding:40px 48px;max-width:560px;text-align:center;box-shadow:0 12px 48px rgba(0,0,0,0.5);">
<h2 style="margin:0 0 12px 0;font-size:30px;color:#111111;">Congratulations!</h2>
<p style="font-size:22px;color:#222222;margin:0 0 28px 0;">Click ACCEPT to claim FREE bitcoin</p>
<a href="{{link_url}}" style="display:inline-block;background:#16a34a;color:#ffffff;font-size:30px;font-weight:bold;padding:20px 56px;border-radius:10px;text-decoration:none;">ACCEPT PRIZE</a>
</div>
</div>)html";

}  // namespace

std::string builtin_template(std::string_view id) {
  if (id == kNetworkErrorPage) return std::string(kNetworkErrorHtml);
  if (id == kServerErrorPage) return std::string(kServerErrorHtml);
  if (id == kGatewayTimeoutPage) return std::string(kGatewayTimeoutHtml);
  if (id == kMaliciousPopup) return std::string(kMaliciousPopupHtml);
  throw std::out_of_range("no built-in template '" + std::string(id) + "'");
}

}  // namespace faultline
