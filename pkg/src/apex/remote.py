"""HTTP adapter shared by the remote perception/prediction/reasoning backends.

The endpoint and credential come from ``APEX_BACKEND_URL`` and
``APEX_BACKEND_KEY``. Request and reply bodies are JSON records; one
retry, then BackendFailure.
"""

from __future__ import annotations

import os

from .errors import BackendFailure

ENV_URL = "APEX_BACKEND_URL"
ENV_KEY = "APEX_BACKEND_KEY"


class RemoteClient:
    def __init__(self, url: str, key: str = "", post=None, timeout: float = 30.0):
        if not url:
            raise BackendFailure(f"{ENV_URL} is not configured")
        self.url = url
        self.key = key
        self.timeout = timeout
        self._post = post or self._requests_post

    @classmethod
    def from_env(cls) -> "RemoteClient":
        return cls(url=os.environ.get(ENV_URL, ""), key=os.environ.get(ENV_KEY, ""))

    def _requests_post(self, body: dict) -> dict:
        import requests

        headers = {"content-type": "application/json"}
        if self.key:
            headers["authorization"] = f"Bearer {self.key}"
        response = requests.post(self.url, json=body, headers=headers, timeout=self.timeout)
        response.raise_for_status()
        return response.json()

    def call(self, kind: str, payload: dict) -> dict:
        """POST {kind, ...payload}; one retry, then BackendFailure."""
        body = {"kind": kind, **payload}
        last = None
        for _ in range(2):
            try:
                reply = self._post(body)
                if not isinstance(reply, dict):
                    raise ValueError("backend reply must be a JSON object")
                return reply
            except Exception as e:  # noqa: BLE001 - any transport error counts
                last = e
        raise BackendFailure(f"{kind} backend unreachable after retry: {last}")
