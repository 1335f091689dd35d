package com.example.tracker;

public class TrackerSession extends BluetoothGattCallback {
    private BluetoothGatt gatt;
    private BluetoothGattCharacteristic cmd;
    private final SecureRandom random = new SecureRandom();

    public void onCharacteristicChanged(BluetoothGatt g, BluetoothGattCharacteristic c) {
        byte[] challenge = c.getValue();
        gatt.writeCharacteristic(answer(challenge));
    }

    BluetoothGattCharacteristic answer(byte[] challenge) {
        byte[] nonce = new byte[16];
        random.nextBytes(nonce);
        Cipher cipher = Cipher.getInstance("AES/GCM/NoPadding");
        cipher.init(Cipher.ENCRYPT_MODE, Keys.session());
        cmd.setValue(cipher.doFinal(Keys.concat(challenge, nonce)));
        return cmd;
    }
}
