// Entry point: wires the views to the daemon client and runs the poll loop.
//
// The bearer token arrives in the URL fragment (#token=...), which the
// browser never sends over the network; the daemon prints that URL at
// startup.  Without a token we render a hint instead of a broken UI.
import { ApiError, DaemonClient, tokenFromFragment } from "./api.js";
import { el, replace } from "./dom.js";
import { DEFAULT_POLL_SECONDS, pollMillis, unreadCount } from "./format.js";
import { composeView, contactsView, inboxView, readView, statusBarView, toastView, } from "./views.js";
const POLL_KEY = "warp2.poll_seconds";
function main() {
    const app = document.getElementById("app");
    const token = tokenFromFragment(location.hash);
    if (!token) {
        replace(app, el("div", { class: "no-token" }, el("h1", {}, "warp2"), el("p", {}, "No access token in the URL. Start the daemon (warp2 daemon) and open ", "the link it prints — the token rides in the #fragment and never ", "leaves this machine.")));
        return;
    }
    const api = new DaemonClient("", token);
    const toast = toastView();
    let lastSync = null;
    let messages = [];
    function fail(err) {
        const e = err instanceof ApiError ? err : new ApiError("internal", String(err));
        toast.show("error", `${e.code}: ${e.message}`);
    }
    // -- views ------------------------------------------------------------------
    const inbox = inboxView({
        onOpen: async (id) => {
            try {
                reader.render(await api.message(id));
                show("read");
                refresh();
            }
            catch (err) {
                fail(err);
            }
        },
    });
    const reader = readView({
        onAck: async (id) => {
            try {
                const purged = await api.ack(id);
                toast.show("info", purged ? "Receipt sent; server copy purged." : "Already purged.");
                reader.render(await api.message(id));
                refresh();
            }
            catch (err) {
                fail(err);
            }
        },
        onBack: () => show("inbox"),
    });
    const compose = composeView({
        onSend: async (to, subject, body, attachmentB64) => {
            if (!to) {
                toast.show("error", "unknown-contact: pick a recipient");
                return;
            }
            try {
                const res = await api.send(to, subject, body, attachmentB64);
                toast.show("info", res.queued
                    ? "Server unreachable; message queued, will retry on sync."
                    : `Sent ${res.header_id.slice(0, 12)}…`);
                compose.reset();
                show("inbox");
                refresh();
            }
            catch (err) {
                fail(err);
            }
        },
    });
    const contacts = contactsView({
        onAdd: async (alias, publicKey) => {
            try {
                await api.addContact(alias, publicKey);
                contacts.clearForm();
                toast.show("info", `Added ${alias}.`);
                refresh();
            }
            catch (err) {
                fail(err);
            }
        },
        onRotate: async (alias) => {
            try {
                const res = await api.rotate(alias);
                toast.show("info", `Offered ${alias} a fresh key (${res.rotation_state}).`);
                refresh();
            }
            catch (err) {
                fail(err);
            }
        },
    });
    const statusBar = statusBarView({
        onSyncNow: () => syncNow(),
        onIntervalChange: (raw) => {
            localStorage.setItem(POLL_KEY, raw);
            schedule();
        },
    }, Number(localStorage.getItem(POLL_KEY)) || DEFAULT_POLL_SECONDS);
    // -- navigation ----------------------------------------------------------------
    const badge = el("span", { class: "badge" });
    const tabs = {
        inbox: { button: el("button", { onclick: () => show("inbox") }, "Inbox ", badge), view: inbox.root },
        compose: { button: el("button", { onclick: () => show("compose") }, "Compose"), view: compose.root },
        contacts: { button: el("button", { onclick: () => show("contacts") }, "Contacts"), view: contacts.root },
        read: { button: el("button", { class: "hidden" }), view: reader.root },
    };
    const nav = el("nav", {}, tabs.inbox.button, tabs.compose.button, tabs.contacts.button);
    const mainEl = el("main", {});
    function show(name) {
        replace(mainEl, tabs[name].view);
        for (const [key, tab] of Object.entries(tabs)) {
            tab.button.classList.toggle("active", key === name);
        }
    }
    replace(app, el("header", {}, el("h1", {}, "warp2"), nav), mainEl, statusBar.root, toast.root);
    show("inbox");
    // -- data flow -------------------------------------------------------------------
    async function refresh() {
        try {
            const [status, msgs, cts] = await Promise.all([
                api.status(),
                api.messages(),
                api.contacts(),
            ]);
            messages = msgs;
            inbox.render(messages);
            compose.setContacts(cts);
            contacts.render(cts, status.identity_key);
            statusBar.render(status, lastSync);
            const unread = unreadCount(messages);
            badge.textContent = unread ? String(unread) : "";
        }
        catch (err) {
            fail(err);
        }
    }
    async function syncNow() {
        try {
            lastSync = await api.sync();
            if (lastSync.new_message_ids.length) {
                toast.show("info", `${lastSync.new_message_ids.length} new message(s).`);
            }
            if (lastSync.delivered_ids.length) {
                toast.show("info", `${lastSync.delivered_ids.length} of yours confirmed delivered.`);
            }
        }
        catch (err) {
            fail(err);
        }
        refresh();
    }
    let timer;
    function schedule() {
        if (timer !== undefined)
            clearInterval(timer);
        timer = setInterval(syncNow, pollMillis(localStorage.getItem(POLL_KEY)));
    }
    schedule();
    syncNow();
}
main();
