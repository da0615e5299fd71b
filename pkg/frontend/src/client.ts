/**
 * Line-delimited JSON client for the `vcle env-serve` subprocess.
 *
 * One request is in flight at a time (the service is strictly
 * request/response). Child stderr is retained so a crash surfaces with
 * its log attached.
 */

import { ChildProcessWithoutNullStreams, spawn } from "node:child_process";
import { createInterface, Interface } from "node:readline";

export class ChildCrashError extends Error {
  constructor(message: string, public readonly log: string) {
    super(`${message}\n--- child log ---\n${log}`);
    this.name = "ChildCrashError";
  }
}

export class RemoteEnvError extends Error {
  constructor(public readonly code: string, message: string) {
    super(message);
    this.name = code;
  }
}

export class EnvServiceClient {
  private child: ChildProcessWithoutNullStreams;
  private lines: Interface;
  private stderrTail: string[] = [];
  private pending: Array<{
    resolve: (value: any) => void;
    reject: (err: Error) => void;
  }> = [];
  private exited = false;

  constructor(command: string, args: string[]) {
    this.child = spawn(command, args, { stdio: ["pipe", "pipe", "pipe"] });
    this.lines = createInterface({ input: this.child.stdout });
    this.lines.on("line", (line) => this.onLine(line));
    this.child.stderr.on("data", (chunk: Buffer) => {
      this.stderrTail.push(chunk.toString());
      if (this.stderrTail.length > 50) this.stderrTail.shift();
    });
    this.child.on("error", (err) => this.failAll(`spawn failed: ${err.message}`));
    this.child.on("exit", (code) => {
      this.exited = true;
      if (this.pending.length > 0) {
        this.failAll(`environment process exited with code ${code}`);
      }
    });
  }

  private onLine(line: string): void {
    const waiter = this.pending.shift();
    if (!waiter) return;
    try {
      waiter.resolve(JSON.parse(line));
    } catch (err) {
      waiter.reject(new Error(`bad response line: ${line}`));
    }
  }

  private failAll(message: string): void {
    const error = new ChildCrashError(message, this.stderrTail.join(""));
    for (const waiter of this.pending.splice(0)) {
      waiter.reject(error);
    }
  }

  request(payload: object): Promise<any> {
    return new Promise((resolve, reject) => {
      if (this.exited) {
        reject(new ChildCrashError("environment process is not running",
          this.stderrTail.join("")));
        return;
      }
      this.pending.push({ resolve, reject });
      this.child.stdin.write(JSON.stringify(payload) + "\n");
    }).then((response: any) => {
      if (!response.ok) {
        throw new RemoteEnvError(response.error ?? "EnvError",
          response.message ?? "environment error");
      }
      return response;
    });
  }

  async dispose(): Promise<void> {
    if (!this.exited) {
      try {
        await this.request({ op: "close" });
      } catch {
        // already going down
      }
      this.child.stdin.end();
    }
    if (!this.exited) {
      await new Promise<void>((resolve) => {
        const timer = setTimeout(() => {
          this.child.kill();
          resolve();
        }, 3000);
        this.child.on("exit", () => {
          clearTimeout(timer);
          resolve();
        });
      });
    }
  }
}
