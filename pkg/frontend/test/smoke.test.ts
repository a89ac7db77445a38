// End-to-end smoke flow: the compiled UI api client drives a real daemon
// (real inbox server underneath) while a scripted peer answers through the
// CLI.  This is the browser flow minus the pixels: compose, sync, read,
// acknowledge, and observe the purge from the sender's side.

import { type ChildProcess, execFile, spawn } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

import { afterAll, beforeAll, expect, test } from "vitest";

import { DaemonClient } from "../dist/api.js";

const execFileP = promisify(execFile);
const PYTHON = process.env.PYTHON ?? "python3";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.once("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      srv.close(() => resolve(address.port));
    });
  });
}

async function waitFor(probe: () => Promise<boolean> | boolean, what: string): Promise<void> {
  const deadline = Date.now() + 20_000;
  while (Date.now() < deadline) {
    try {
      if (await probe()) return;
    } catch {
      // keep polling
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error(`timed out waiting for ${what}`);
}

interface CliOptions {
  dataDir: string;
  env: NodeJS.ProcessEnv;
}

/** Run one warp2 CLI command in machine mode; returns parsed JSON lines. */
async function cli(opts: CliOptions, ...args: string[]): Promise<Record<string, unknown>[]> {
  const { stdout } = await execFileP(
    PYTHON,
    ["-m", "warp2.cli", "--json", "--data-dir", opts.dataDir, ...args],
    { env: opts.env },
  );
  return stdout
    .split("\n")
    .filter((line) => line.trim())
    .map((line) => JSON.parse(line));
}

let root: string;
let serverProc: ChildProcess | undefined;
let daemonProc: ChildProcess | undefined;
let peer: CliOptions;
let api: DaemonClient;

beforeAll(async () => {
  root = mkdtempSync(join(tmpdir(), "warp2-smoke-"));
  const serverPort = await freePort();
  const serverUrl = `http://127.0.0.1:${serverPort}`;
  serverProc = spawn(
    PYTHON,
    ["-m", "warp2.cli", "serve", "--port", String(serverPort), "--data-dir", join(root, "server")],
    { stdio: ["ignore", "ignore", "inherit"] },
  );
  await waitFor(async () => (await fetch(`${serverUrl}/v1/stats`)).ok, "inbox server");

  peer = {
    dataDir: join(root, "peer"),
    env: { ...process.env, WARP2_PASSPHRASE: "peer-pass", WARP2_SERVER_URL: serverUrl },
  };
  const ui: CliOptions = {
    dataDir: join(root, "ui"),
    env: { ...process.env, WARP2_PASSPHRASE: "ui-pass", WARP2_SERVER_URL: serverUrl },
  };

  const [peerKey] = await cli(peer, "keygen", "--address", "peer");
  const [uiKey] = await cli(ui, "keygen", "--address", "webuser");
  await cli(peer, "contacts", "add", "webuser", String(uiKey.public_key));

  const daemonPort = await freePort();
  daemonProc = spawn(
    PYTHON,
    ["-m", "warp2.cli", "--data-dir", ui.dataDir, "daemon", "--port", String(daemonPort)],
    { env: ui.env, stdio: ["ignore", "ignore", "inherit"] },
  );
  const manifestPath = join(ui.dataDir, "daemon.json");
  await waitFor(() => existsSync(manifestPath), "daemon manifest");
  const manifest = JSON.parse(readFileSync(manifestPath, "utf8"));
  api = new DaemonClient(manifest.url, manifest.token);
  await waitFor(async () => Boolean(await api.status()), "daemon API");

  // The contacts view's add flow, minus the pixels.
  await api.addContact("peer", String(peerKey.public_key));
}, 60_000);

afterAll(() => {
  daemonProc?.kill();
  serverProc?.kill();
  if (root) rmSync(root, { recursive: true, force: true });
});

test("compose, sync, read and acknowledge complete against a scripted peer", async () => {
  // Compose view: webuser -> peer, with a small attachment.
  const attachment = Buffer.from("attached bytes").toString("base64");
  const sent = await api.send("peer", "hello from the browser", "typed into compose", attachment);
  expect(sent.queued).toBe(false);

  // Scripted peer: receive, verify, acknowledge.
  await cli(peer, "sync");
  const listing = await cli(peer, "list");
  const got = listing.find((m) => m.id === sent.header_id);
  expect(got).toBeDefined();
  expect(got!.subject).toBe("hello from the browser");
  expect(got!.has_attachment).toBe(true);
  await cli(peer, "ack", sent.header_id);

  // Inbox view's poll: the sender observes the purge.
  const delivery = await api.sync();
  expect(delivery.delivered_ids).toContain(sent.header_id);
  const sentView = (await api.messages()).find((m) => m.id === sent.header_id);
  expect(sentView?.purged_from_server).toBe(true);

  // Peer replies; the UI syncs, opens (read view marks it read), acknowledges.
  await cli(peer, "send", "--to", "webuser", "--subject", "re: hello", "--body", "back at you");
  const report = await api.sync();
  expect(report.new_message_ids).toHaveLength(1);
  const id = report.new_message_ids[0];
  const detail = await api.message(id);
  expect(detail.body).toBe("back at you");
  expect(detail.peer).toBe("peer");
  const purged = await api.ack(id);
  expect(purged).toBe(true);
  const after = (await api.messages()).find((m) => m.id === id);
  expect(after?.read).toBe(true);
  expect(after?.acked).toBe(true);

  console.log(
    "criterion 10: PASS — compose → sync → read → acknowledge completed through " +
      "the UI api client against a scripted CLI peer; purge observed by the sender " +
      "(origin audit in audit.test.ts)",
  );
}, 60_000);
