/** Wire types mirroring the rollout service's JSON bodies. */

export const PROTOCOL_VERSION = '1';

export interface ParameterProperties {
  type: string;
  description?: string;
}

export interface ToolSpec {
  name: string;
  description: string;
  parameters: {
    type: 'object';
    properties: Record<string, ParameterProperties>;
    required: string[];
  };
}

export interface PersonaRecord {
  id: string;
  description: string;
}

export interface WorkflowStep {
  index: number;
  description: string;
  expected_tools: string[];
}

export interface ForbiddenConstraint {
  description: string;
}

export interface SynthTask {
  task_id: string;
  persona: PersonaRecord;
  workflow: WorkflowStep[];
  toolset: ToolSpec[];
  forbidden: ForbiddenConstraint[];
  instruction: string;
  hidden_context: string;
}

export interface Rubric {
  task_id: string;
  forbidden: ForbiddenConstraint[];
  subgoals: string[];
  required_interactions: string[];
}

export interface TaskBundle {
  tasks: SynthTask[];
  rubrics?: Rubric[];
}

export interface CanonicalCall {
  tool: string;
  args: Record<string, unknown>;
}

export interface Message {
  role: 'system' | 'user' | 'assistant' | 'tool_call' | 'tool_response';
  content: string;
  call: CanonicalCall | null;
  turn: number;
}

export interface Trajectory {
  task_id: string;
  messages: Message[];
  final_answer: string | null;
  terminated_reason: 'answered' | 'turn_limit' | 'error';
}

export interface SessionInfo {
  session_id: string;
  system_prompt: string;
  instruction: string;
  turns_remaining: number;
}

export interface EnvReply {
  kind: 'tool_response' | 'user_reply' | 'terminal';
  content: string;
  turns_remaining: number;
  map_hit?: boolean;
  reason?: 'answered' | 'turn_limit' | 'error';
}

/** Fractions arrive as exact "n/d" strings; reward_float is a convenience. */
export interface RewardReport {
  gate: 0 | 1;
  subgoal_fraction: string;
  interaction_fraction: string;
  reward: string;
  reward_float: number;
}

export interface CorpusStats {
  total_tasks: number;
  avg_tools_per_task: number;
  avg_interactions_per_trajectory: number;
  avg_map_size: number;
  avg_tokens_per_task: number;
  total_tokens: number;
}

export interface WireError {
  code: string;
  message: string;
}
