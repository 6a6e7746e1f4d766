import threading

import pytest

from leanstack.cluster.topology import ClusterTopology
from leanstack.cluster.worker import WorkerServer


class WorkerFleet:
    """In-process worker daemons, one thread each."""

    def __init__(self, tmp_path, n, leader_participates=False):
        self.servers = []
        self.threads = []
        endpoints = []
        for i in range(n):
            root = tmp_path / f"worker{i}"
            server = WorkerServer(("127.0.0.1", 0), str(root))
            thread = threading.Thread(target=server.serve_forever, daemon=True)
            thread.start()
            self.servers.append(server)
            self.threads.append(thread)
            endpoints.append(("127.0.0.1", server.server_address[1]))
        self.topology = ClusterTopology(tuple(endpoints), leader_participates)

    def stop_worker(self, index):
        self.servers[index].shutdown()
        self.servers[index].server_close()

    def shutdown(self):
        for server in self.servers:
            try:
                server.shutdown()
                server.server_close()
            except OSError:
                pass


@pytest.fixture
def fleet3(tmp_path):
    fleet = WorkerFleet(tmp_path, 3)
    yield fleet
    fleet.shutdown()


@pytest.fixture
def fleet1(tmp_path):
    fleet = WorkerFleet(tmp_path, 1)
    yield fleet
    fleet.shutdown()


def make_fleet(tmp_path, n, leader_participates=False):
    return WorkerFleet(tmp_path, n, leader_participates)
