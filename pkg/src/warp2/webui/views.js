// The UI is a handful of "views": plain objects owning a root element and a
// render function, wired together by app.ts.  No view talks to the network;
// they call back into the handlers they were given.
import { clear, el, replace } from "./dom.js";
import { b64Size, fmtBytes, fmtDate } from "./format.js";
// -- notifications -------------------------------------------------------------
export function toastView() {
    const root = el("div", { class: "toasts" });
    function show(kind, text) {
        const item = el("div", { class: `toast toast-${kind}` }, text);
        root.append(item);
        setTimeout(() => item.remove(), 6000);
    }
    return { root, show };
}
// -- inbox ---------------------------------------------------------------------
export function inboxView(handlers) {
    const tbody = el("tbody");
    const empty = el("p", { class: "empty" }, "No messages yet. Sync, or compose one.");
    const root = el("section", { class: "inbox" }, el("table", { class: "messages" }, el("thead", {}, el("tr", {}, el("th", {}, ""), el("th", {}, "Contact"), el("th", {}, "Subject"), el("th", {}, "Date"), el("th", {}, "Flags"))), tbody), empty);
    function flags(m) {
        const out = [];
        if (m.has_attachment)
            out.push("📎");
        if (m.acked)
            out.push("ack");
        if (m.purged_from_server)
            out.push("purged");
        return out.join(" ");
    }
    function render(messages) {
        clear(tbody);
        empty.style.display = messages.length ? "none" : "";
        for (const m of messages) {
            const row = el("tr", {
                class: m.direction === "received" && !m.read ? "unread" : "",
                onclick: () => handlers.onOpen(m.id),
            }, el("td", { class: "dir" }, m.direction === "sent" ? "→" : "←"), el("td", {}, m.peer), el("td", { class: "subject" }, m.subject || "(no subject)"), el("td", { class: "date" }, fmtDate(m.date)), el("td", { class: "flags" }, flags(m)));
            tbody.append(row);
        }
    }
    return { root, render };
}
// -- single message ------------------------------------------------------------
export function readView(handlers) {
    const root = el("section", { class: "read" });
    function render(m) {
        const children = [
            el("button", { class: "link", onclick: () => handlers.onBack() }, "← back"),
            el("h2", {}, m.subject || "(no subject)"),
            el("p", { class: "meta" }, `${m.direction === "sent" ? "To" : "From"}: ${m.peer} — ${fmtDate(m.date)}`),
            el("pre", { class: "body" }, m.body),
        ];
        if (m.attachment_b64 !== null) {
            const name = (m.subject.replace(/[^\w.-]+/g, "_") || "attachment") + ".bin";
            const link = el("a", { class: "attachment", download: name, href: "#" }, `Download attachment (${fmtBytes(b64Size(m.attachment_b64))})`);
            link.addEventListener("click", () => {
                // Built lazily so a large attachment is only materialized on demand.
                const bytes = Uint8Array.from(atob(m.attachment_b64), (c) => c.charCodeAt(0));
                const url = URL.createObjectURL(new Blob([bytes]));
                link.href = url;
                setTimeout(() => URL.revokeObjectURL(url), 30000);
            });
            children.push(link);
        }
        if (m.direction === "received") {
            const ack = el("div", { class: "ack-box" }, el("p", {}, m.acked
                ? "Receipt acknowledged; the server copy is purged."
                : "Acknowledging proves receipt to the sender and permanently purges the server's copy. Your local copy stays."), m.acked
                ? null
                : el("button", { onclick: () => handlers.onAck(m.id) }, "Acknowledge receipt"));
            children.push(ack);
        }
        else {
            children.push(el("p", { class: "meta" }, m.purged_from_server
                ? "Delivered: the recipient acknowledged and the server copy is gone."
                : "Waiting for the recipient's acknowledgement."));
        }
        replace(root, ...children);
    }
    return { root, render };
}
// -- compose ---------------------------------------------------------------------
export function composeView(handlers) {
    const to = el("select", { class: "to" });
    const subject = el("input", { type: "text", placeholder: "Subject" });
    const body = el("textarea", { rows: "12", placeholder: "Write something…" });
    const file = el("input", { type: "file" });
    const send = el("button", { class: "primary" }, "Send");
    const root = el("section", { class: "compose" }, el("label", {}, "To ", to), subject, body, el("label", { class: "attach" }, "Attachment ", file), send);
    send.addEventListener("click", async () => {
        let attachmentB64;
        const picked = file.files && file.files[0];
        if (picked) {
            const buf = new Uint8Array(await picked.arrayBuffer());
            let bin = "";
            for (const byte of buf)
                bin += String.fromCharCode(byte);
            attachmentB64 = btoa(bin);
        }
        handlers.onSend(to.value, subject.value, body.value, attachmentB64);
    });
    function setContacts(contacts) {
        const current = to.value;
        clear(to);
        for (const c of contacts) {
            to.append(el("option", { value: c.alias }, c.alias));
        }
        if (contacts.some((c) => c.alias === current))
            to.value = current;
    }
    function reset() {
        subject.value = "";
        body.value = "";
        file.value = "";
    }
    return { root, setContacts, reset };
}
// -- contacts ---------------------------------------------------------------------
export function contactsView(handlers) {
    const list = el("div", { class: "contact-list" });
    const alias = el("input", { type: "text", placeholder: "alias" });
    const key = el("input", { type: "text", placeholder: "paste their public key" });
    const keyFile = el("input", { type: "file" });
    const identity = el("code", { class: "identity" });
    const root = el("section", { class: "contacts" }, el("h2", {}, "Contacts"), list, el("div", { class: "add-contact" }, el("h3", {}, "Add a contact"), alias, key, el("label", { class: "attach" }, "…or from a file ", keyFile), el("button", { onclick: () => handlers.onAdd(alias.value.trim(), key.value.trim()) }, "Add")), el("div", { class: "own-key" }, el("h3", {}, "Your public key"), identity));
    keyFile.addEventListener("change", async () => {
        const picked = keyFile.files && keyFile.files[0];
        if (picked)
            key.value = (await picked.text()).trim();
    });
    function render(contacts, identityKey) {
        identity.textContent = identityKey;
        clear(list);
        if (!contacts.length) {
            list.append(el("p", { class: "empty" }, "Nobody yet. Swap public keys out of band."));
            return;
        }
        for (const c of contacts) {
            list.append(el("div", { class: "contact" }, el("strong", {}, c.alias), el("code", { class: "pubkey" }, c.public_key), el("span", { class: `rotation rotation-${c.rotation_state}` }, c.rotation_state === "offered"
                ? "rotation pending"
                : c.rotation_state === "completed"
                    ? `keys rotated (${c.previous_keys}×)`
                    : "initial keys"), el("button", {
                onclick: () => handlers.onRotate(c.alias),
                ...(c.rotation_state === "offered" ? { disabled: true } : {}),
            }, "Rotate keys")));
        }
    }
    function clearForm() {
        alias.value = "";
        key.value = "";
        keyFile.value = "";
    }
    return { root, render, clearForm };
}
// -- status bar ---------------------------------------------------------------------
export function statusBarView(handlers, initialSeconds) {
    const fields = el("span", { class: "fields" }, "not connected");
    const interval = el("input", {
        type: "number",
        min: "5",
        value: String(initialSeconds),
        class: "interval",
    });
    interval.addEventListener("change", () => handlers.onIntervalChange(interval.value));
    const root = el("footer", { class: "statusbar" }, fields, el("span", { class: "spacer" }), el("label", {}, "poll every ", interval, " s"), el("button", { onclick: () => handlers.onSyncNow() }, "Sync now"));
    function render(status, lastSync) {
        const bits = [
            `${status.address} @ ${status.server_url || "(no server)"}`,
            `cursor ${status.cursor}`,
            `${status.mailstore_size} stored`,
            `${status.skip_cache_size} skipped`,
        ];
        if (status.pending_uploads)
            bits.push(`${status.pending_uploads} queued`);
        if (status.last_sync_at)
            bits.push(`synced ${fmtDate(status.last_sync_at)}`);
        if (lastSync && lastSync.new_message_ids.length) {
            bits.push(`+${lastSync.new_message_ids.length} new`);
        }
        fields.textContent = bits.join(" · ");
    }
    return { root, render };
}
