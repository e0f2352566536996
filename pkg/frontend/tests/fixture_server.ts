/** In-process backend fixture: the API surface the dashboard consumes,
 * seeded with records and a scripted job lifecycle. */

import { createServer, IncomingMessage, Server, ServerResponse } from "node:http";
import type { AddressInfo } from "node:net";

import type { DefectRecord, MarkingRecord, ProcessingJob } from "../src/types.js";

export interface Fixture {
  server: Server;
  baseUrl: string;
  defects: Map<string, DefectRecord>;
  markings: Map<string, MarkingRecord>;
  jobs: Map<string, ProcessingJob>;
  close(): Promise<void>;
}

function seedDefect(id: string, index: number): DefectRecord {
  return {
    id,
    image_id: `img-${index}`,
    class: ["Road_Block", "Sealed_Crack", "Road_Crocodile"][index % 3]!,
    lat: -27.6 - index * 0.002,
    lon: 153.1 + index * 0.002,
    bbox: { x_min: 10, y_min: 10, x_max: 30, y_max: 30 },
    confidence: 0.5 + index * 0.05,
    status: "Unchecked",
    checked_by: null,
    checked_at: null,
    created_at: `2026-08-10T00:00:0${index}Z`,
  };
}

async function readBody(req: IncomingMessage): Promise<Buffer> {
  const chunks: Buffer[] = [];
  for await (const chunk of req) chunks.push(chunk as Buffer);
  return Buffer.concat(chunks);
}

function json(res: ServerResponse, status: number, body: unknown): void {
  res.writeHead(status, { "content-type": "application/json" });
  res.end(JSON.stringify(body));
}

export async function startFixture(seedCount = 5): Promise<Fixture> {
  const defects = new Map<string, DefectRecord>();
  for (let i = 0; i < seedCount; i++) defects.set(`d${i}`, seedDefect(`d${i}`, i));
  const markings = new Map<string, MarkingRecord>();
  markings.set("m0", {
    id: "m0",
    image_id: "img-0",
    points: [[5, 5], [25, 5], [25, 15], [5, 15]],
    coverage: 0.9,
    status: "Unchecked",
    checked_by: null,
    checked_at: null,
    created_at: "2026-08-10T00:00:00Z",
  });
  const jobs = new Map<string, ProcessingJob>();
  let jobCounter = 0;

  const server = createServer(async (req, res) => {
    const url = new URL(req.url ?? "/", "http://fixture");
    const path = url.pathname;

    if (req.method === "GET" && path === "/api/defects") {
      let rows = [...defects.values()];
      const statuses = url.searchParams.get("status")?.split(",");
      if (statuses?.length) rows = rows.filter((r) => statuses.includes(r.status));
      const classes = url.searchParams.get("class")?.split(",");
      if (classes?.length) rows = rows.filter((r) => classes.includes(r.class));
      return json(res, 200, rows);
    }

    const detailMatch = path.match(/^\/api\/defects\/([^/]+)$/);
    if (req.method === "GET" && detailMatch) {
      const record = defects.get(detailMatch[1]!);
      if (!record) return json(res, 404, { error: "not_found", detail: "unknown defect" });
      return json(res, 200, {
        ...record,
        image_url: `/files/images/${record.image_id}.png`,
        mask_url: `/files/masks/${record.id}.png`,
      });
    }

    const validateMatch = path.match(/^\/api\/defects\/([^/]+)\/validation$/);
    if (req.method === "POST" && validateMatch) {
      const record = defects.get(validateMatch[1]!);
      if (!record) return json(res, 404, { error: "not_found", detail: "unknown defect" });
      const body = JSON.parse((await readBody(req)).toString());
      if (!["Confirmed", "Rejected"].includes(body.status)) {
        return json(res, 422, { error: "invalid_status", detail: "bad status" });
      }
      const updated: DefectRecord = {
        ...record,
        status: body.status,
        checked_by: body.user,
        checked_at: "2026-08-10T12:00:00Z",
      };
      defects.set(record.id, updated);
      return json(res, 200, updated);
    }

    if (req.method === "GET" && path === "/api/markings") {
      return json(res, 200, [...markings.values()]);
    }

    if (req.method === "POST" && path === "/api/uploads") {
      const body = await readBody(req);
      const images = (body.toString("latin1").match(/filename="[^"]+\.(png|jpe?g)"/gi) ?? []).length;
      if (images === 0) return json(res, 400, { error: "bad_request", detail: "no images" });
      jobCounter += 1;
      const id = `job-${jobCounter}`;
      jobs.set(id, {
        id,
        state: "Queued",
        submitted_at: "2026-08-10T12:00:00Z",
        finished_at: null,
        total_images: images,
        processed: 0,
        failures: [],
      });
      return json(res, 202, { job_id: id });
    }

    const jobMatch = path.match(/^\/api\/jobs\/([^/]+)$/);
    if (req.method === "GET" && jobMatch) {
      const job = jobs.get(jobMatch[1]!);
      if (!job) return json(res, 404, { error: "not_found", detail: "unknown job" });
      // scripted lifecycle: advance one step per poll
      if (job.state === "Queued") job.state = "Running";
      else if (job.state === "Running") {
        job.processed += 1;
        if (job.processed >= job.total_images) {
          job.state = "Done";
          job.finished_at = "2026-08-10T12:00:09Z";
        }
      }
      return json(res, 200, job);
    }

    if (req.method === "GET" && path === "/api/export") {
      const fmt = url.searchParams.get("format");
      if (fmt !== "csv" && fmt !== "json") {
        return json(res, 400, { error: "bad_request", detail: "bad format" });
      }
      let rows = [...defects.values()];
      if (url.searchParams.get("validated_only") === "true") {
        rows = rows.filter((r) => r.status !== "Unchecked");
      }
      if (fmt === "json") return json(res, 200, rows);
      const lines = ["id,image_id,class,status", ...rows.map((r) => `${r.id},${r.image_id},${r.class},${r.status}`)];
      res.writeHead(200, { "content-type": "text/csv; charset=utf-8" });
      return res.end(lines.join("\n") + "\n");
    }

    json(res, 404, { error: "not_found", detail: `no route ${path}` });
  });

  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const { port } = server.address() as AddressInfo;
  return {
    server,
    baseUrl: `http://127.0.0.1:${port}`,
    defects,
    markings,
    jobs,
    close: () => new Promise((resolve) => server.close(() => resolve())),
  };
}
