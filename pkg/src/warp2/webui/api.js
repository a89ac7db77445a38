// Typed client for the local daemon's /local/* API.
//
// Every network call the UI ever makes funnels through request() below, and
// request() only accepts a path, never a full URL: the UI can only talk to
// the origin that served it, i.e. the loopback daemon.  No key material and
// no cryptography live on this side of the line; the daemon does all of it.
export class ApiError extends Error {
    constructor(code, detail) {
        super(detail || code);
        this.code = code;
    }
}
/** Pull the bearer token out of a "#token=..." URL fragment. */
export function tokenFromFragment(hash) {
    const m = /(?:^#|&)token=([^&]+)/.exec(hash);
    return m ? decodeURIComponent(m[1]) : "";
}
export class DaemonClient {
    constructor(base = "", token = "") {
        this.base = base;
        this.token = token;
    }
    async request(method, path, body) {
        if (!path.startsWith("/")) {
            throw new ApiError("bad-path", `refusing non-relative request path: ${path}`);
        }
        let resp;
        try {
            resp = await fetch(this.base + path, {
                method,
                headers: {
                    Authorization: `Bearer ${this.token}`,
                    ...(body === undefined ? {} : { "Content-Type": "application/json" }),
                },
                body: body === undefined ? undefined : JSON.stringify(body),
            });
        }
        catch {
            throw new ApiError("network-failure", "daemon unreachable");
        }
        const data = await resp.json().catch(() => ({}));
        if (!resp.ok) {
            throw new ApiError(data.error ?? `http-${resp.status}`, data.detail ?? "");
        }
        return data;
    }
    async messages() {
        const data = await this.request("GET", "/local/messages");
        return data.messages;
    }
    message(id) {
        return this.request("GET", `/local/messages/${encodeURIComponent(id)}`);
    }
    send(to, subject, body, attachmentB64) {
        return this.request("POST", "/local/send", {
            to,
            subject,
            body,
            attachment_b64: attachmentB64 ?? null,
        });
    }
    async ack(id) {
        const data = await this.request("POST", `/local/ack/${encodeURIComponent(id)}`);
        return data.purged;
    }
    sync() {
        return this.request("POST", "/local/sync");
    }
    async contacts() {
        const data = await this.request("GET", "/local/contacts");
        return data.contacts;
    }
    addContact(alias, publicKey) {
        return this.request("POST", "/local/contacts", { alias, public_key: publicKey });
    }
    rotate(alias) {
        return this.request("POST", `/local/rotate/${encodeURIComponent(alias)}`);
    }
    status() {
        return this.request("GET", "/local/status");
    }
}
