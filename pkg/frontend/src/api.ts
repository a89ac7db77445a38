// Typed client for the local daemon's /local/* API.
//
// Every network call the UI ever makes funnels through request() below, and
// request() only accepts a path, never a full URL: the UI can only talk to
// the origin that served it, i.e. the loopback daemon.  No key material and
// no cryptography live on this side of the line; the daemon does all of it.

export interface MessageSummary {
  id: string;
  direction: "sent" | "received";
  peer: string;
  subject: string;
  date: string;
  has_attachment: boolean;
  read: boolean;
  acked: boolean;
  purged_from_server: boolean;
}

export interface MessageDetail extends MessageSummary {
  body: string;
  attachment_b64: string | null;
}

export interface SyncReport {
  pages: number;
  attempted_decrypts: number;
  new_message_ids: string[];
  skipped: number;
  quarantined: number;
  cursor: number;
  delivered_ids: string[];
}

export interface Contact {
  alias: string;
  public_key: string;
  rotation_state: string;
  previous_keys: number;
}

export interface DaemonStatus {
  address: string;
  cursor: number;
  skip_cache_size: number;
  mailstore_size: number;
  outbox_size: number;
  pending_uploads: number;
  live_keys: number;
  last_sync_at: string;
  identity_key: string;
  server_url: string;
}

export interface SendResult {
  header_id: string;
  queued: boolean;
}

export interface RotateResult {
  header_id: string;
  rotation_state: string;
}

export class ApiError extends Error {
  constructor(public code: string, detail: string) {
    super(detail || code);
  }
}

/** Pull the bearer token out of a "#token=..." URL fragment. */
export function tokenFromFragment(hash: string): string {
  const m = /(?:^#|&)token=([^&]+)/.exec(hash);
  return m ? decodeURIComponent(m[1]) : "";
}

export class DaemonClient {
  constructor(private base: string = "", private token: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    if (!path.startsWith("/")) {
      throw new ApiError("bad-path", `refusing non-relative request path: ${path}`);
    }
    let resp: Response;
    try {
      resp = await fetch(this.base + path, {
        method,
        headers: {
          Authorization: `Bearer ${this.token}`,
          ...(body === undefined ? {} : { "Content-Type": "application/json" }),
        },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch {
      throw new ApiError("network-failure", "daemon unreachable");
    }
    const data = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      throw new ApiError(data.error ?? `http-${resp.status}`, data.detail ?? "");
    }
    return data as T;
  }

  async messages(): Promise<MessageSummary[]> {
    const data = await this.request<{ messages: MessageSummary[] }>("GET", "/local/messages");
    return data.messages;
  }

  message(id: string): Promise<MessageDetail> {
    return this.request("GET", `/local/messages/${encodeURIComponent(id)}`);
  }

  send(to: string, subject: string, body: string, attachmentB64?: string): Promise<SendResult> {
    return this.request("POST", "/local/send", {
      to,
      subject,
      body,
      attachment_b64: attachmentB64 ?? null,
    });
  }

  async ack(id: string): Promise<boolean> {
    const data = await this.request<{ purged: boolean }>(
      "POST",
      `/local/ack/${encodeURIComponent(id)}`,
    );
    return data.purged;
  }

  sync(): Promise<SyncReport> {
    return this.request("POST", "/local/sync");
  }

  async contacts(): Promise<Contact[]> {
    const data = await this.request<{ contacts: Contact[] }>("GET", "/local/contacts");
    return data.contacts;
  }

  addContact(alias: string, publicKey: string): Promise<Contact> {
    return this.request("POST", "/local/contacts", { alias, public_key: publicKey });
  }

  rotate(alias: string): Promise<RotateResult> {
    return this.request("POST", `/local/rotate/${encodeURIComponent(alias)}`);
  }

  status(): Promise<DaemonStatus> {
    return this.request("GET", "/local/status");
  }
}
