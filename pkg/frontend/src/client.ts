/**
 * Client for the rollout service. One SimClient per server; one ClientSession
 * per rollout. Every response body carries either `result` or `error`; errors
 * surface as the typed classes in errors.ts.
 */

import {
  ConnectionError,
  ProtocolMismatchError,
  TerminatedError,
  errorForStatus,
} from './errors.js';
import {
  CorpusStats,
  EnvReply,
  PROTOCOL_VERSION,
  RewardReport,
  SessionInfo,
  TaskBundle,
  Trajectory,
  WireError,
} from './types.js';

async function request<T>(baseUrl: string, path: string, method: string, body?: unknown): Promise<T> {
  let response: Response;
  try {
    response = await fetch(`${baseUrl}${path}`, {
      method,
      headers: { 'Content-Type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  } catch (cause) {
    throw new ConnectionError(`failed to reach ${baseUrl}${path}: ${String(cause)}`);
  }
  let parsed: { result?: T; error?: WireError };
  try {
    parsed = (await response.json()) as { result?: T; error?: WireError };
  } catch {
    throw new ConnectionError(`non-JSON response from ${path} (HTTP ${response.status})`);
  }
  if (!response.ok || parsed.error !== undefined) {
    const err = parsed.error ?? { code: 'unknown', message: `HTTP ${response.status}` };
    throw errorForStatus(response.status, err.code, err.message);
  }
  return parsed.result as T;
}

export class SimClient {
  constructor(readonly baseUrl: string) {}

  /** Verify reachability and that the server speaks our protocol version. */
  async connect(): Promise<void> {
    const body = await request<{ protocol_version: string }>(this.baseUrl, '/version', 'GET');
    if (body.protocol_version !== PROTOCOL_VERSION) {
      throw new ProtocolMismatchError(
        `server protocol ${body.protocol_version}, client expects ${PROTOCOL_VERSION}`,
      );
    }
  }

  /** Register tasks (and optionally rubrics); idempotent on identical content. */
  async registerTasks(bundle: TaskBundle): Promise<string[]> {
    const body = await request<{ task_ids: string[] }>(this.baseUrl, '/tasks', 'POST', bundle);
    return body.task_ids;
  }

  /** Open a session; sessions sharing groupId share one consistency map. */
  async reset(taskId: string, groupId?: string): Promise<ClientSession> {
    const info = await request<SessionInfo>(this.baseUrl, '/sessions', 'POST', {
      task_id: taskId,
      group_id: groupId ?? null,
    });
    return new ClientSession(this.baseUrl, taskId, info);
  }

  /** Score a terminal session (by id) or a raw trajectory. */
  async judge(target: { sessionId: string } | { trajectory: Trajectory }): Promise<RewardReport> {
    const body = 'sessionId' in target ? { session_id: target.sessionId } : { trajectory: target.trajectory };
    return request<RewardReport>(this.baseUrl, '/judge', 'POST', body);
  }

  async stats(): Promise<CorpusStats> {
    return request<CorpusStats>(this.baseUrl, '/stats', 'GET');
  }
}

export class ClientSession {
  readonly sessionId: string;
  readonly systemPrompt: string;
  readonly instruction: string;
  turnsRemaining: number;
  terminated = false;
  terminalReason: EnvReply['reason'];

  constructor(
    private readonly baseUrl: string,
    readonly taskId: string,
    info: SessionInfo,
  ) {
    this.sessionId = info.session_id;
    this.systemPrompt = info.system_prompt;
    this.instruction = info.instruction;
    this.turnsRemaining = info.turns_remaining;
  }

  /** Advance one agent turn. Raises TerminatedError on use after terminal. */
  async step(agentMessage: string): Promise<EnvReply> {
    if (this.terminated) {
      throw new TerminatedError(`session ${this.sessionId} already ${this.terminalReason ?? 'terminated'}`);
    }
    const reply = await request<EnvReply>(this.baseUrl, `/sessions/${this.sessionId}/step`, 'POST', {
      agent_message: agentMessage,
    });
    this.turnsRemaining = reply.turns_remaining;
    if (reply.kind === 'terminal') {
      this.terminated = true;
      this.terminalReason = reply.reason;
    }
    return reply;
  }

  async judge(): Promise<RewardReport> {
    return request<RewardReport>(this.baseUrl, '/judge', 'POST', { session_id: this.sessionId });
  }
}

export type Policy = (session: ClientSession, lastReply: EnvReply | null) => Promise<string> | string;

export interface EpisodeResult {
  session: ClientSession;
  replies: EnvReply[];
}

/** Drive one session to termination with a policy callback. */
export async function runEpisode(session: ClientSession, policy: Policy, maxSteps = 64): Promise<EpisodeResult> {
  const replies: EnvReply[] = [];
  let last: EnvReply | null = null;
  for (let i = 0; i < maxSteps && !session.terminated; i++) {
    const message = await policy(session, last);
    last = await session.step(message);
    replies.push(last);
  }
  return { session, replies };
}

/**
 * Bounded-concurrency batch helper. Each episode owns its session, so steps
 * within a session stay strictly sequential (one in-flight step per session);
 * only distinct sessions run in parallel.
 */
export async function runEpisodeBatch(
  client: SimClient,
  specs: { taskId: string; groupId?: string }[],
  policy: Policy,
  concurrency = 4,
): Promise<EpisodeResult[]> {
  const results: EpisodeResult[] = new Array(specs.length);
  let next = 0;
  async function worker(): Promise<void> {
    while (next < specs.length) {
      const index = next++;
      const spec = specs[index];
      const session = await client.reset(spec.taskId, spec.groupId);
      results[index] = await runEpisode(session, policy);
    }
  }
  const workers = Array.from({ length: Math.max(1, Math.min(concurrency, specs.length)) }, () => worker());
  await Promise.all(workers);
  return results;
}
