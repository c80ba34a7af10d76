import json


class Client:
    """A client.

    def looks_like_code(self):
    """

    timeout = 5

    def __init__(self, host, port=80):
        self.host = host
        self.port = port

    def address(self):
        return f"{self.host}:{self.port}"

    def send(self, payload):
        body = json.dumps(payload)

        return len(body)

    class Inner:
        def ping(self):
            return "pong"

        def pong(self):
            return "ping"


def make_client():
    class Local:
        def value(self):
            return 42
    return Local().value()


class Empty:
    pass


def after_class():
    return Client("localhost").address()
